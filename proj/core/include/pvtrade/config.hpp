#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pvtrade/evaluation.hpp"
#include "pvtrade/market_data.hpp"
#include "pvtrade/training.hpp"

namespace pvtrade {

struct DataConfig {
  std::uint64_t seed = 17;
  GeneratorConfig generator;
  std::string split = "2024-01-01T00:00:00Z";  ///< first hour of the evaluation period
  std::string dir;  ///< load market.csv/pv.csv from here instead of generating
};

struct EvaluationConfig {
  AblationMode ablation_mode = AblationMode::retrain;
  double sign_spread_threshold = 4.0;
  double cvar_level = 0.05;
  std::size_t bench_steps = 100000;
  std::size_t bench_warmup = 1000;
  std::string scenarios;  ///< scenario manifest path, relative to the config file
};

/// The whole run manifest. Sections mirror the module config types.
struct AppConfig {
  DataConfig data;
  FeatureOptions features;
  EnvConfig env;
  TrainConfig training;
  EvaluationConfig evaluation;
  std::vector<std::uint64_t> seeds{17, 29, 41, 53, 67};
  int workers = 1;

  void validate() const;
};

/// Parses JSON text over the defaults. Unknown keys and ill-typed values throw
/// ConfigError naming the field.
AppConfig parse_config(std::string_view json_text);
AppConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every field (sorted keys), as written next to artifacts.
std::string dump_config(const AppConfig& config);

/// 16 hex digits: FNV-1a 64 over the compact canonical JSON.
std::string config_hash(const AppConfig& config);

std::vector<ScenarioConfig> parse_scenarios(std::string_view json_text);
std::vector<ScenarioConfig> load_scenarios(const std::filesystem::path& path);

std::string code_version();

/// "pvtrade <version> config=<hash> seed=<seed>"
std::string provenance(const std::string& hash, std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pvtrade
