#include "test_support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace pvtrade::testing {

std::shared_ptr<const Dataset> seed17_ptr() {
  static const auto data = std::make_shared<const Dataset>(generate_synthetic_dataset(GeneratorConfig{}, 17));
  return data;
}

const Dataset& seed17() { return *seed17_ptr(); }

Dataset flat_dataset(std::size_t hours, double surplus) {
  Dataset d;
  const HourIndex start = hour_index_from_ymd(2023, 1, 1);
  for (std::size_t i = 0; i < hours; ++i) {
    MarketRecord m;
    m.timestamp = start + static_cast<HourIndex>(i);
    m.p_da = 50.0;
    m.p_id_bid = 48.0;
    m.p_id_ask = 52.0;
    m.p_im = 50.0;
    m.bid_depth = 20.0;
    m.ask_depth = 20.0;
    PvRecord p;
    p.timestamp = m.timestamp;
    p.ghi = 500.0;
    p.cloud_cover = 0.2;
    p.temp_2m = 10.0;
    p.g_da = 4.0;
    p.g_act = 4.0 + surplus;
    p.forecast_1h = p.forecast_5h = p.forecast_da = 4.0 + surplus;
    d.market.push_back(m);
    d.pv.push_back(p);
  }
  return d;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("pvtrade_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pvtrade::testing
