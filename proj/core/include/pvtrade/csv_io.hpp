#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pvtrade/market_data.hpp"

namespace pvtrade {

/// Column order written by `write_market_csv`; loading accepts any order.
inline const std::vector<std::string> kMarketColumns = {
    "timestamp", "p_da", "p_id_bid", "p_id_ask", "p_im", "bid_depth", "ask_depth", "regulation_state"};
inline const std::vector<std::string> kPvColumns = {
    "timestamp", "g_act", "g_da", "forecast_1h", "forecast_5h", "forecast_da", "ghi", "cloud_cover",
    "temp_2m"};

/// Lines starting with '#' carry provenance and are skipped by the loader.
void write_market_csv(const std::filesystem::path& path, const std::vector<MarketRecord>& rows,
                      const std::string& provenance = {});
void write_pv_csv(const std::filesystem::path& path, const std::vector<PvRecord>& rows,
                  const std::string& provenance = {});

std::vector<MarketRecord> load_market_csv(const std::filesystem::path& path);
std::vector<PvRecord> load_pv_csv(const std::filesystem::path& path);

/// Loads `market.csv` and `pv.csv` from `dir` and validates the pair.
Dataset load_csv(const std::filesystem::path& dir, double capacity = 0.0);

/// Shortest round-trip decimal representation.
std::string format_number(double v);

}  // namespace pvtrade
