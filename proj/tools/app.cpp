#include "app.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "pvtrade/checkpoint.hpp"
#include "pvtrade/csv_io.hpp"
#include "pvtrade/errors.hpp"

namespace pvtrade::app {

namespace fs = std::filesystem;

namespace {

/// Runs fn(0..n-1) on up to `workers` threads. Results must be written by
/// index so the output does not depend on scheduling. The first exception is
/// rethrown after all threads join.
template <typename F>
void parallel_for(std::size_t n, int workers, F fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  }
}

std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!s.empty() && s.back() != '_') {
      s += '_';
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s.empty() ? "cell" : s;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const auto item = text.substr(pos, end - pos);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("--seeds", fmt::format("'{}' is not a comma-separated list of seeds", text));
    }
    seeds.push_back(std::stoull(item));
    pos = end + 1;
  }
  return seeds;
}

std::vector<TrainedModel> load_models(const AppConfig& config, const fs::path& dir) {
  const auto hash = config_hash(config);
  std::vector<TrainedModel> models;
  for (auto seed : config.seeds) {
    auto ck = load_checkpoint(checkpoint_path(dir, seed));
    if (ck.config_hash != hash) {
      spdlog::warn("checkpoint for seed {} was trained under config {} (current {})", seed, ck.config_hash, hash);
    }
    models.push_back(std::move(ck.model));
  }
  return models;
}

fs::path checkpoints_dir(const RunOptions& opt) {
  return opt.checkpoints.empty() ? opt.out / "checkpoints" : opt.checkpoints;
}

std::vector<ScenarioConfig> scenario_list(const AppConfig& config, const RunOptions& opt) {
  if (!opt.scenarios.empty()) return load_scenarios(opt.scenarios);
  if (!config.evaluation.scenarios.empty()) return load_scenarios(config.evaluation.scenarios);
  ScenarioConfig base;
  base.horizon = config.features.horizon;
  return {base};
}

}  // namespace

void apply_overrides(AppConfig& config, const std::optional<std::vector<std::uint64_t>>& seeds,
                     const std::optional<int>& workers) {
  if (seeds) config.seeds = *seeds;
  if (workers) config.workers = *workers;
  config.validate();
}

Dataset obtain_dataset(const AppConfig& config, const fs::path& dir) {
  const fs::path src = !dir.empty() ? dir : fs::path(config.data.dir);
  if (!src.empty()) {
    spdlog::info("loading data from {}", src.string());
    return load_csv(src, config.data.generator.capacity);
  }
  spdlog::info("generating synthetic data (seed {})", config.data.seed);
  return generate_synthetic_dataset(config.data.generator, config.data.seed);
}

std::size_t split_row(const Dataset& data, const AppConfig& config) {
  if (data.size() == 0) throw DataError("empty dataset");
  const HourIndex boundary = parse_iso_hour(config.data.split);
  const HourIndex first = data.first_hour();
  if (boundary <= first || boundary > first + static_cast<HourIndex>(data.size()) - 1) {
    throw ConfigError("data.split", fmt::format("{} is outside the dataset ({} .. {})", config.data.split,
                                                format_iso_hour(first), format_iso_hour(data.market.back().timestamp)));
  }
  return static_cast<std::size_t>(boundary - first);
}

fs::path checkpoint_path(const fs::path& dir, std::uint64_t seed) {
  return dir / fmt::format("checkpoint_seed{}.json", seed);
}

void cmd_generate(const AppConfig& config, std::uint64_t seed, const fs::path& out) {
  ensure_dir(out);
  const auto data = generate_synthetic_dataset(config.data.generator, seed);
  const auto prov = provenance(config_hash(config), seed);
  write_market_csv(out / "market.csv", data.market, prov);
  write_pv_csv(out / "pv.csv", data.pv, prov);
  spdlog::info("wrote {} hours to {}", data.size(), out.string());
}

std::vector<TrainedModel> cmd_train(const AppConfig& config, const RunOptions& opt) {
  const auto data = obtain_dataset(config, opt.data);
  const auto boundary = split_row(data, config);
  const auto ck_dir = checkpoints_dir(opt);
  ensure_dir(opt.out);
  ensure_dir(ck_dir);
  const auto hash = config_hash(config);

  std::vector<TrainedModel> models(config.seeds.size());
  parallel_for(config.seeds.size(), config.workers, [&](std::size_t i) {
    const auto seed = config.seeds[i];
    spdlog::info("training seed {} ({} epochs x {} steps, {})", seed, config.training.epochs,
                 config.training.steps_per_epoch, to_string(config.training.mode));
    models[i] = train_model(data, boundary, config.features, {}, config.env, config.training, seed);
  });
  std::vector<CurvePoint> curve;
  for (const auto& m : models) {
    save_checkpoint(checkpoint_path(ck_dir, m.seed), m, hash);
    curve.insert(curve.end(), m.curve.begin(), m.curve.end());
    if (!m.curve.empty()) spdlog::info("seed {} final mean return {:.2f}", m.seed, m.curve.back().mean_return);
  }
  write_curve_csv(opt.out / "learning_curve.csv", curve, provenance(hash, config.data.seed));
  return models;
}

std::vector<ScenarioResult> cmd_evaluate(const AppConfig& config, const RunOptions& opt) {
  const auto cells = scenario_list(config, opt);
  const auto base_models = load_models(config, checkpoints_dir(opt));
  auto data = std::make_shared<const Dataset>(obtain_dataset(config, opt.data));
  ensure_dir(opt.out);
  const auto hash = config_hash(config);

  EvalSetup setup;
  setup.data = data;
  setup.boundary = split_row(*data, config);
  setup.env = config.env;
  setup.sign_spread_threshold = config.evaluation.sign_spread_threshold;
  setup.cvar_level = config.evaluation.cvar_level;

  std::vector<ScenarioResult> results(cells.size());
  parallel_for(cells.size(), config.workers, [&](std::size_t c) {
    const auto& cell = cells[c];
    std::vector<TrainedModel> models;
    if (needs_retrain(cell, config.evaluation.ablation_mode, config.features.horizon)) {
      FeatureOptions fo;
      fo.horizon = cell.horizon;
      TrainConfig tc = config.training;
      if (cell.cvar_alpha) {
        tc.risk.mode = RiskMode::cvar;
        tc.risk.alpha = *cell.cvar_alpha;
      }
      std::vector<AblationGroup> ablate;
      if (config.evaluation.ablation_mode == AblationMode::retrain) ablate = cell.ablate;
      for (auto seed : config.seeds) {
        spdlog::info("[{}] retraining seed {}", cell.name, seed);
        models.push_back(train_model(*data, setup.boundary, fo, ablate, config.env, tc, seed));
      }
    } else {
      models = base_models;
    }
    spdlog::info("[{}] evaluating {} seed(s)", cell.name, models.size());
    results[c] = run_scenario(setup, cell, models, c == 0 || opt.log_trajectories);
  });

  const auto prov = provenance(hash, config.data.seed);
  write_scenario_csv(opt.out / "scenarios.csv", results, prov);
  write_seed_csv(opt.out / "scenario_seeds.csv", results, prov);
  write_pattern_csv(opt.out / "trading_pattern.csv", trading_pattern_report(results.front().trajectories), prov);
  if (opt.log_trajectories) {
    for (std::size_t c = 0; c < results.size(); ++c) {
      write_trajectory_csv(opt.out / fmt::format("trajectories_{}.csv", slug(cells[c].name)),
                           results[c].trajectories, provenance(hash, config.seeds.front()));
    }
  }

  std::cout << fmt::format("{:<28} {:>12} {:>8} {:>12} {:>9} {:>8} {:>10}\n", "scenario", "FDRL k€", "CI95",
                           "spot k€", "uplift", "trades", "CVaR5%");
  for (const auto& r : results) {
    const auto& m = r.metrics;
    std::cout << fmt::format("{:<28} {:>12.2f} {:>8.2f} {:>12.2f} {:>9.2f} {:>8.1f} {:>10.3f}\n", m.name,
                             m.profit_keur, m.ci95_keur, m.spot_only_keur, m.uplift_keur, m.trades, m.cvar5_keur);
  }
  return results;
}

LatencyStats cmd_bench(const AppConfig& config, const RunOptions& opt) {
  const std::size_t steps = opt.steps.value_or(config.evaluation.bench_steps);
  if (steps < kMinLatencySteps) {
    throw InputError(fmt::format("refusing to benchmark {} steps: at least {} are needed for stable percentiles",
                                 steps, kMinLatencySteps));
  }
  const auto ck_file =
      opt.checkpoint.empty() ? checkpoint_path(checkpoints_dir(opt), config.seeds.front()) : opt.checkpoint;
  const auto ck = load_checkpoint(ck_file);
  const auto data = obtain_dataset(config, opt.data);
  const auto boundary = split_row(data, config);
  const auto inputs = prepare_inputs(data, ck.model.features, ck.model.normalizer, ck.model.ablate);
  const auto starts = episode_starts_in(data, boundary, data.size());
  ensure_dir(opt.out);
  const auto stats =
      latency_benchmark(ck.model.params, inputs, starts, config.env, steps, config.evaluation.bench_warmup);
  write_latency_csv(opt.out / "latency.csv", stats, provenance(config_hash(config), ck.model.seed));
  std::cout << fmt::format(
      "decisions {}  mean {:.4f} ms  P50 {:.4f}  P95 {:.4f}  P99 {:.4f}  P99.9 {:.4f}  episode {:.3f} ms  "
      "throughput {:.1f} episodes/s  steps/episode {:.1f}\n",
      stats.n_steps, stats.mean_ms, stats.p50_ms, stats.p95_ms, stats.p99_ms, stats.p999_ms, stats.episode_ms,
      stats.throughput, stats.steps_per_episode);
  return stats;
}

std::vector<WeightReportRow> cmd_report(const AppConfig& config, const RunOptions& opt) {
  const auto models = load_models(config, checkpoints_dir(opt));
  std::vector<PolicyParams> params;
  for (const auto& m : models) params.push_back(m.params);
  const auto rows = weight_report(params);
  ensure_dir(opt.out);
  const auto prov = provenance(config_hash(config), config.data.seed);
  write_weights_csv(opt.out / "weights.csv", rows, prov);
  {
    // Registry dump so weight columns can be audited against feature order.
    std::ofstream reg(opt.out / "features.csv", std::ios::binary | std::ios::trunc);
    if (!reg) throw IoError("cannot write " + (opt.out / "features.csv").string());
    reg << "# " << prov << "\nindex,name,domain\n";
    const auto& features = feature_registry();
    for (std::size_t i = 0; i < features.size(); ++i) {
      reg << i << ',' << features[i].name << ',' << to_string(features[i].domain) << '\n';
    }
  }
  for (const auto& r : rows) {
    if (r.rank > 5) continue;
    std::cout << fmt::format("{:>5} {:<3} {:<18} {:>10.4f} ± {:.4f}\n", action_name(r.action), r.rank, r.feature,
                             r.mean, r.std);
  }
  return rows;
}

namespace {

void configure_logging() {
  auto logger = spdlog::get("pvtrade");
  if (!logger) logger = spdlog::stderr_logger_mt("pvtrade");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("PVTRADE_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App cli{"Feature-driven intraday trading for a PV producer: data, training, evaluation"};
  cli.require_subcommand(1);
  std::string config_file;
  RunOptions opt;
  std::string seeds_text;
  std::optional<int> workers;
  std::optional<std::uint64_t> gen_seed;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON run manifest (defaults apply to missing keys)");
    sub->add_option("--out", opt.out, "output directory (created if absent)");
    sub->add_option("--seeds", seeds_text, "comma-separated seed list, overrides the config");
    sub->add_option("--scenarios", opt.scenarios, "scenario manifest, overrides the config");
    sub->add_option("--workers", workers, "worker threads for seeds/cells (default 1)")->check(CLI::PositiveNumber);
    sub->add_flag("--log-trajectories", opt.log_trajectories, "write per-step trajectory CSVs");
  };
  auto* gen = cli.add_subcommand("generate", "write synthetic market.csv and pv.csv");
  common(gen);
  gen->add_option("--seed", gen_seed, "generator seed (default: data.seed)");
  auto* tr = cli.add_subcommand("train", "train one policy per seed");
  common(tr);
  tr->add_option("--data", opt.data, "directory with market.csv and pv.csv");
  tr->add_option("--checkpoints", opt.checkpoints, "checkpoint directory (default <out>/checkpoints)");
  auto* ev = cli.add_subcommand("evaluate", "out-of-sample scenario grid");
  common(ev);
  ev->add_option("--data", opt.data, "directory with market.csv and pv.csv");
  ev->add_option("--checkpoints", opt.checkpoints, "checkpoint directory (default <out>/checkpoints)");
  auto* be = cli.add_subcommand("bench", "single-decision latency benchmark");
  common(be);
  be->add_option("--data", opt.data, "directory with market.csv and pv.csv");
  be->add_option("--checkpoints", opt.checkpoints, "checkpoint directory (default <out>/checkpoints)");
  be->add_option("--checkpoint", opt.checkpoint, "checkpoint file (default: first seed)");
  be->add_option("--steps", opt.steps, "timed decisions (>= 1000)");
  auto* re = cli.add_subcommand("report", "ranked policy weights across seeds");
  common(re);
  re->add_option("--checkpoints", opt.checkpoints, "checkpoint directory (default <out>/checkpoints)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  configure_logging();
  try {
    AppConfig config = config_file.empty() ? AppConfig{} : load_config(config_file);
    std::optional<std::vector<std::uint64_t>> seeds;
    if (!seeds_text.empty()) seeds = parse_seed_list(seeds_text);
    apply_overrides(config, seeds, workers);

    if (gen->parsed()) {
      cmd_generate(config, gen_seed.value_or(config.data.seed), opt.out);
    } else if (tr->parsed()) {
      cmd_train(config, opt);
    } else if (ev->parsed()) {
      cmd_evaluate(config, opt);
    } else if (be->parsed()) {
      cmd_bench(config, opt);
    } else if (re->parsed()) {
      cmd_report(config, opt);
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace pvtrade::app
