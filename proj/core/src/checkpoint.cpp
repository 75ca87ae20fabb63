#include "pvtrade/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "pvtrade/config.hpp"
#include "pvtrade/errors.hpp"

namespace pvtrade {

using nlohmann::json;

std::string checkpoint_to_string(const TrainedModel& m, const std::string& config_hash) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["code_version"] = code_version();
  j["config_hash"] = config_hash;
  j["seed"] = m.seed;
  j["mode"] = to_string(m.mode);
  j["horizon"] = to_string(m.features.horizon);
  json ablate = json::array();
  for (auto g : m.ablate) ablate.push_back(to_string(g));
  j["ablate"] = ablate;
  json names = json::array();
  for (const auto& f : feature_registry()) names.push_back(std::string(f.name));
  j["feature_names"] = names;
  j["normalizer"] = {{"mean", m.normalizer.mean}, {"std", m.normalizer.std}};
  json w = json::array();
  for (int a = 0; a < m.params.action_dim; ++a) {
    const auto first = m.params.W.begin() + static_cast<std::ptrdiff_t>(a) * kFeatureDim;
    w.push_back(std::vector<double>(first, first + kFeatureDim));
  }
  j["policy"] = {{"action_dim", m.params.action_dim}, {"W", w}, {"log_sigma", m.params.log_sigma},
                 {"v", m.params.v}};
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  Checkpoint c;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw DataError("not a pvtrade checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError(fmt::format("checkpoint version {} unsupported (expected {})", version, kCheckpointVersion));
    }
    const auto names = j.at("feature_names").get<std::vector<std::string>>();
    const auto& reg = feature_registry();
    if (names.size() != reg.size()) throw DataError("checkpoint feature list does not match this build");
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] != reg[i].name) {
        throw DataError(fmt::format("checkpoint feature {} is '{}', expected '{}'", i, names[i], reg[i].name));
      }
    }
    c.code_version = j.at("code_version").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    auto& m = c.model;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.mode = train_mode_from_string(j.at("mode").get<std::string>());
    m.features.horizon = horizon_from_string(j.at("horizon").get<std::string>());
    for (const auto& g : j.at("ablate").get<std::vector<std::string>>()) m.ablate.push_back(ablation_from_string(g));
    m.normalizer.mean = j.at("normalizer").at("mean").get<decltype(m.normalizer.mean)>();
    m.normalizer.std = j.at("normalizer").at("std").get<decltype(m.normalizer.std)>();
    const auto& p = j.at("policy");
    m.params.action_dim = p.at("action_dim").get<int>();
    m.params.W.clear();
    for (const auto& row : p.at("W")) {
      const auto r = row.get<std::vector<double>>();
      if (r.size() != kFeatureDim) throw DataError("checkpoint weight row has wrong length");
      m.params.W.insert(m.params.W.end(), r.begin(), r.end());
    }
    m.params.log_sigma = p.at("log_sigma").get<std::vector<double>>();
    m.params.v = p.at("v").get<std::vector<double>>();
    m.params.validate();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed checkpoint: {}", e.what()));
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(fmt::format("malformed checkpoint: {}", e.what()));
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model, const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << checkpoint_to_string(model, config_hash);
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return checkpoint_from_string(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pvtrade
