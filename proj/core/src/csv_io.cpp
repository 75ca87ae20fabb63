#include "pvtrade/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

/// Header-indexed reader shared by both record types.
class Table {
 public:
  Table(const fs::path& path, const std::vector<std::string>& required) : path_(path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      if (!have_header) {
        auto cols = split(line);
        for (std::size_t i = 0; i < cols.size(); ++i) index_[trim(cols[i])] = i;
        have_header = true;
        continue;
      }
      rows_.push_back(split(line));
    }
    if (!have_header) throw DataError(path.string() + ": missing header row");
    for (const auto& c : required) {
      if (!index_.count(c)) throw DataError(fmt::format("{}: missing column '{}'", path.string(), c));
    }
  }

  std::size_t size() const { return rows_.size(); }

  const std::string& cell(std::size_t row, const std::string& col) const {
    const auto& r = rows_[row];
    const auto idx = index_.at(col);
    if (idx >= r.size()) {
      throw DataError(fmt::format("{}: too few fields", path_.string()), row + 1);
    }
    return r[idx];
  }

  double number(std::size_t row, const std::string& col) const {
    const std::string s = trim(cell(row, col));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) {
      throw DataError(fmt::format("NaN in required field '{}' ('{}')", col, s), row + 1);
    }
    return v;
  }

  HourIndex hour(std::size_t row) const {
    try {
      return parse_iso_hour(trim(cell(row, "timestamp")));
    } catch (const InputError& e) {
      throw DataError(e.what(), row + 1);
    }
  }

 private:
  fs::path path_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void check_monotone(const std::vector<HourIndex>& ts) {
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] <= ts[i - 1]) throw DataError("timestamps not strictly increasing", i + 1);
    if (ts[i] != ts[i - 1] + 1) throw DataError("non-contiguous timestamps", i + 1);
  }
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{}", v);
}

void write_market_csv(const fs::path& path, const std::vector<MarketRecord>& rows,
                      const std::string& provenance) {
  auto out = open_for_write(path);
  if (!provenance.empty()) out << "# " << provenance << '\n';
  for (std::size_t i = 0; i < kMarketColumns.size(); ++i) out << (i ? "," : "") << kMarketColumns[i];
  out << '\n';
  for (const auto& m : rows) {
    out << format_iso_hour(m.timestamp) << ',' << format_number(m.p_da) << ',' << format_number(m.p_id_bid)
        << ',' << format_number(m.p_id_ask) << ',' << format_number(m.p_im) << ','
        << format_number(m.bid_depth) << ',' << format_number(m.ask_depth) << ','
        << to_string(m.regulation_state) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_pv_csv(const fs::path& path, const std::vector<PvRecord>& rows, const std::string& provenance) {
  auto out = open_for_write(path);
  if (!provenance.empty()) out << "# " << provenance << '\n';
  for (std::size_t i = 0; i < kPvColumns.size(); ++i) out << (i ? "," : "") << kPvColumns[i];
  out << '\n';
  for (const auto& p : rows) {
    out << format_iso_hour(p.timestamp) << ',' << format_number(p.g_act) << ',' << format_number(p.g_da)
        << ',' << format_number(p.forecast_1h) << ',' << format_number(p.forecast_5h) << ','
        << format_number(p.forecast_da) << ',' << format_number(p.ghi) << ','
        << format_number(p.cloud_cover) << ',' << format_number(p.temp_2m) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MarketRecord> load_market_csv(const fs::path& path) {
  Table t(path, kMarketColumns);
  std::vector<MarketRecord> rows(t.size());
  std::vector<HourIndex> ts(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto& m = rows[i];
    m.timestamp = ts[i] = t.hour(i);
    m.p_da = t.number(i, "p_da");
    m.p_id_bid = t.number(i, "p_id_bid");
    m.p_id_ask = t.number(i, "p_id_ask");
    m.p_im = t.number(i, "p_im");
    m.bid_depth = t.number(i, "bid_depth");
    m.ask_depth = t.number(i, "ask_depth");
    try {
      m.regulation_state = regulation_from_string(trim(t.cell(i, "regulation_state")));
    } catch (const InputError& e) {
      throw DataError(e.what(), i + 1);
    }
    if (m.p_id_ask < m.p_id_bid) throw DataError("p_id_ask < p_id_bid", i + 1);
    if (m.bid_depth < 0.0 || m.ask_depth < 0.0) throw DataError("negative depth", i + 1);
  }
  check_monotone(ts);
  return rows;
}

std::vector<PvRecord> load_pv_csv(const fs::path& path) {
  Table t(path, kPvColumns);
  std::vector<PvRecord> rows(t.size());
  std::vector<HourIndex> ts(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto& p = rows[i];
    p.timestamp = ts[i] = t.hour(i);
    p.g_act = t.number(i, "g_act");
    p.g_da = t.number(i, "g_da");
    p.forecast_1h = t.number(i, "forecast_1h");
    p.forecast_5h = t.number(i, "forecast_5h");
    p.forecast_da = t.number(i, "forecast_da");
    p.ghi = t.number(i, "ghi");
    p.cloud_cover = t.number(i, "cloud_cover");
    p.temp_2m = t.number(i, "temp_2m");
  }
  check_monotone(ts);
  return rows;
}

Dataset load_csv(const fs::path& dir, double capacity) {
  Dataset d;
  d.market = load_market_csv(dir / "market.csv");
  d.pv = load_pv_csv(dir / "pv.csv");
  validate_dataset(d, capacity);
  return d;
}

}  // namespace pvtrade
