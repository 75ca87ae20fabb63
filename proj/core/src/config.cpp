#include "pvtrade/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "pvtrade/errors.hpp"

#ifndef PVTRADE_VERSION
#define PVTRADE_VERSION "0.0.0"
#endif

namespace pvtrade {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + key, fmt::format("unexpected value {}", j_.at(key).dump()));
    }
  }

  template <typename E, typename From>
  void enumeration(const char* key, E& out, From from_string) {
    std::string s;
    if (!j_.contains(key)) return;
    field(key, s);
    try {
      out = from_string(s);
    } catch (const Error& e) {
      throw ConfigError(path_ + key, e.what());
    }
  }

  template <typename F>
  void section(const char* key, F&& fn) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    Reader sub(j_.at(key), path_ + key + ".");
    fn(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(path_ + k, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(json& j) : j_(j) { j_ = json::object(); }

  template <typename T>
  void field(const char* key, T& v) {
    j_[key] = v;
  }

  template <typename E, typename From>
  void enumeration(const char* key, E& v, From) {
    j_[key] = to_string(v);
  }

  template <typename F>
  void section(const char* key, F&& fn) {
    Writer sub(j_[key]);
    fn(sub);
  }

 private:
  json& j_;
};

template <typename V>
void visit_generator(V& v, GeneratorConfig& g) {
  v.field("capacity", g.capacity);
  v.field("capacity_factor", g.capacity_factor);
  v.field("sigma_da", g.sigma_da);
  v.field("sigma_id", g.sigma_id);
  v.field("horizon_correlation", g.horizon_correlation);
  v.field("error_persistence", g.error_persistence);
  v.field("latitude", g.latitude);
  v.field("longitude", g.longitude);
  v.field("start_year", g.start_year);
  v.field("years", g.years);
  v.section("price", [&](V& s) {
    s.field("mean", g.price.mean);
    s.field("ar_coef", g.price.ar_coef);
    s.field("volatility", g.price.volatility);
    s.field("diurnal_amplitude", g.price.diurnal_amplitude);
    s.field("seasonal_amplitude", g.price.seasonal_amplitude);
    s.field("solar_depression", g.price.solar_depression);
  });
  v.section("spread", [&](V& s) {
    s.field("spread_mean", g.spread.spread_mean);
    s.field("spread_vol", g.spread.spread_vol);
    s.field("mid_noise", g.spread.mid_noise);
    s.field("mid_noise_bound", g.spread.mid_noise_bound);
    s.field("depth_mean", g.spread.depth_mean);
    s.field("depth_vol", g.spread.depth_vol);
    s.field("depth_floor", g.spread.depth_floor);
  });
  v.section("imbalance", [&](V& s) {
    s.field("persistence", g.imbalance.persistence);
    s.field("coupling", g.imbalance.coupling);
    s.field("threshold", g.imbalance.threshold);
    s.field("up_premium", g.imbalance.up_premium);
    s.field("down_discount", g.imbalance.down_discount);
    s.field("noise", g.imbalance.noise);
  });
}

template <typename V>
void visit_env(V& v, EnvConfig& e) {
  v.field("q_lo", e.q_lo);
  v.field("q_hi", e.q_hi);
  v.field("delta_lo", e.delta_lo);
  v.field("delta_hi", e.delta_hi);
  v.field("lambda_inv", e.lambda_inv);
  v.field("route_through_executor", e.route_through_executor);
  v.enumeration("quote_source", e.quote_source, quote_source_from_string);
  v.section("execution", [&](V& s) {
    s.field("alpha", e.exec.alpha);
    s.field("beta", e.exec.beta);
    s.field("kappa", e.exec.kappa);
    s.field("imp_alpha", e.exec.imp_alpha);
    s.field("imp_beta", e.exec.imp_beta);
  });
  v.section("fill", [&](V& s) {
    s.field("c0", e.fill.c0);
    s.field("c1", e.fill.c1);
    s.field("c2", e.fill.c2);
    s.field("depth_ref", e.fill.depth_ref);
  });
  v.section("midprice", [&](V& s) {
    s.field("kappa_rev", e.midprice.kappa_rev);
    s.field("nu", e.midprice.nu);
    s.field("jump_std", e.midprice.jump_std);
  });
}

template <typename V>
void visit_training(V& v, TrainConfig& t) {
  v.enumeration("mode", t.mode, train_mode_from_string);
  v.field("gamma", t.gamma);
  v.field("lambda_gae", t.lambda_gae);
  v.field("clip_eps", t.clip_eps);
  v.field("lr", t.lr);
  v.field("value_lr", t.value_lr);
  v.field("l2", t.l2);
  v.field("entropy_coef", t.entropy_coef);
  v.field("epochs", t.epochs);
  v.field("steps_per_epoch", t.steps_per_epoch);
  v.field("n_ppo", t.n_ppo);
  v.field("sigma_init", t.sigma_init);
  v.field("normalize_advantages", t.normalize_advantages);
  v.section("risk", [&](V& s) {
    s.enumeration("mode", t.risk.mode, risk_mode_from_string);
    s.field("alpha", t.risk.alpha);
    s.field("theta", t.risk.theta);
  });
}

template <typename V>
void visit_app(V& v, AppConfig& c) {
  v.section("data", [&](V& s) {
    s.field("seed", c.data.seed);
    s.field("split", c.data.split);
    s.field("dir", c.data.dir);
    s.section("generator", [&](V& g) { visit_generator(g, c.data.generator); });
  });
  v.section("features", [&](V& s) { s.enumeration("horizon", c.features.horizon, horizon_from_string); });
  v.section("env", [&](V& s) { visit_env(s, c.env); });
  v.section("training", [&](V& s) { visit_training(s, c.training); });
  v.section("evaluation", [&](V& s) {
    s.enumeration("ablation_mode", c.evaluation.ablation_mode, ablation_mode_from_string);
    s.field("sign_spread_threshold", c.evaluation.sign_spread_threshold);
    s.field("cvar_level", c.evaluation.cvar_level);
    s.field("bench_steps", c.evaluation.bench_steps);
    s.field("bench_warmup", c.evaluation.bench_warmup);
    s.field("scenarios", c.evaluation.scenarios);
  });
  v.field("seeds", c.seeds);
  v.field("workers", c.workers);
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what, fmt::format("invalid JSON: {}", e.what()));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void AppConfig::validate() const {
  data.generator.validate();
  try {
    (void)parse_iso_hour(data.split);
  } catch (const Error& e) {
    throw ConfigError("data.split", e.what());
  }
  env.validate();
  training.validate();
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
  if (!(evaluation.sign_spread_threshold >= 0.0)) {
    throw ConfigError("evaluation.sign_spread_threshold", "must be >= 0");
  }
  if (!(evaluation.cvar_level > 0.0 && evaluation.cvar_level <= 1.0)) {
    throw ConfigError("evaluation.cvar_level", "must be in (0, 1]");
  }
}

AppConfig parse_config(std::string_view text) {
  const json j = parse_json(text, "<config>");
  AppConfig c;
  Reader r(j, "");
  visit_app(r, c);
  r.finish();
  c.validate();
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  AppConfig c = parse_config(read_file(path));
  if (!c.evaluation.scenarios.empty()) {
    std::filesystem::path p(c.evaluation.scenarios);
    if (p.is_relative()) c.evaluation.scenarios = (path.parent_path() / p).lexically_normal().string();
  }
  return c;
}

namespace {

json to_json_value(const AppConfig& config) {
  AppConfig copy = config;
  json j;
  Writer w(j);
  visit_app(w, copy);
  return j;
}

}  // namespace

std::string dump_config(const AppConfig& config) { return to_json_value(config).dump(2) + "\n"; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const AppConfig& config) {
  // The scenario path and data directory locate inputs; they do not change results.
  AppConfig c = config;
  c.evaluation.scenarios.clear();
  c.data.dir.clear();
  c.workers = 1;
  return fmt::format("{:016x}", fnv1a64(to_json_value(c).dump()));
}

std::vector<ScenarioConfig> parse_scenarios(std::string_view text) {
  const json j = parse_json(text, "<scenarios>");
  const json* cells = &j;
  if (j.is_object()) {
    if (!j.contains("scenarios") || j.size() != 1) {
      throw ConfigError("scenarios", "expected {\"scenarios\": [...]} or a bare array");
    }
    cells = &j.at("scenarios");
  }
  if (!cells->is_array()) throw ConfigError("scenarios", "expected an array of cells");
  std::vector<ScenarioConfig> out;
  for (std::size_t i = 0; i < cells->size(); ++i) {
    const std::string prefix = fmt::format("scenarios[{}].", i);
    json cell = cells->at(i);
    if (cell.is_object() && cell.contains("cvar_alpha") && cell.at("cvar_alpha").is_null()) cell.erase("cvar_alpha");
    ScenarioConfig s;
    Reader r(cell, prefix);
    r.field("name", s.name);
    r.field("liquidity_scale", s.liquidity_scale);
    r.field("imbalance_shift", s.imbalance_shift);
    r.enumeration("horizon", s.horizon, horizon_from_string);
    std::vector<std::string> ablate;
    r.field("ablate", ablate);
    for (const auto& a : ablate) {
      try {
        s.ablate.push_back(ablation_from_string(a));
      } catch (const Error& e) {
        throw ConfigError(prefix + "ablate", e.what());
      }
    }
    if (cell.contains("cvar_alpha")) {
      double a = 0.0;
      r.field("cvar_alpha", a);
      s.cvar_alpha = a;
    }
    r.finish();
    try {
      s.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(prefix.substr(0, prefix.size() - 1), e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScenarioConfig> load_scenarios(const std::filesystem::path& path) {
  return parse_scenarios(read_file(path));
}

std::string code_version() { return PVTRADE_VERSION; }

std::string provenance(const std::string& hash, std::uint64_t seed) {
  return fmt::format("pvtrade {} config={} seed={}", code_version(), hash, seed);
}

}  // namespace pvtrade
