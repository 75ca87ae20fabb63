#include "pvtrade/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "pvtrade/errors.hpp"

namespace pvtrade {

std::string to_string(TrainMode m) { return m == TrainMode::alg1 ? "alg1" : "alg2"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "alg1") return TrainMode::alg1;
  if (s == "alg2") return TrainMode::alg2;
  throw ConfigError("training.mode", "expected alg1 or alg2, got '" + s + "'");
}

std::string to_string(RiskMode m) {
  switch (m) {
    case RiskMode::none: return "none";
    case RiskMode::cvar: return "cvar";
    case RiskMode::entropic: return "entropic";
  }
  return "none";
}

RiskMode risk_mode_from_string(const std::string& s) {
  if (s == "none") return RiskMode::none;
  if (s == "cvar") return RiskMode::cvar;
  if (s == "entropic") return RiskMode::entropic;
  throw ConfigError("training.risk.mode", "expected none, cvar or entropic, got '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("training.gamma", "must be in (0, 1]");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) throw ConfigError("training.lambda_gae", "must be in [0, 1]");
  if (!(clip_eps > 0.0)) throw ConfigError("training.clip_eps", "must be > 0");
  if (!(lr > 0.0)) throw ConfigError("training.lr", "must be > 0");
  if (!(value_lr > 0.0)) throw ConfigError("training.value_lr", "must be > 0");
  if (!(l2 >= 0.0)) throw ConfigError("training.l2", "must be >= 0");
  if (!(entropy_coef >= 0.0)) throw ConfigError("training.entropy_coef", "must be >= 0");
  if (epochs < 0) throw ConfigError("training.epochs", "must be >= 0");
  if (steps_per_epoch < 1) throw ConfigError("training.steps_per_epoch", "must be >= 1");
  if (n_ppo < 1) throw ConfigError("training.n_ppo", "must be >= 1");
  if (!(sigma_init > 0.0)) throw ConfigError("training.sigma_init", "must be > 0");
  if (risk.mode == RiskMode::cvar && !(risk.alpha > 0.0 && risk.alpha < 1.0)) {
    throw ConfigError("training.risk.alpha", "must be in (0, 1)");
  }
  if (risk.mode == RiskMode::entropic && !std::isfinite(risk.theta)) {
    throw ConfigError("training.risk.theta", "must be finite");
  }
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                      double lambda_gae) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1) {
    throw ShapeError(fmt::format("compute_gae: {} rewards need {} values, got {}", n, n + 1, values.size()));
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.targets.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    out.targets[k] = rewards[k] + gamma * values[k + 1];
    const double delta = out.targets[k] - values[k];
    acc = delta + gamma * lambda_gae * acc;
    out.advantages[k] = acc;
  }
  return out;
}

double cvar_objective(std::span<const double> returns, double alpha, double xi) {
  double tail = 0.0;
  for (double r : returns) tail += std::max(xi - r, 0.0);
  return xi - tail / ((1.0 - alpha) * static_cast<double>(returns.size()));
}

CvarShaping cvar_shaping(std::span<const double> returns, double alpha) {
  if (returns.empty()) throw InputError("cvar_shaping: no episode returns");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError(fmt::format("cvar_shaping: alpha {} not in (0, 1)", alpha));
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Smallest k with k >= (1−α)N; the k-th order statistic maximizes the
  // piecewise-linear concave objective.
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  CvarShaping out;
  out.xi_star = sorted[k - 1];
  out.cvar = cvar_objective(returns, alpha, out.xi_star);
  out.shaped.reserve(returns.size());
  for (double r : returns) out.shaped.push_back(out.xi_star - std::max(out.xi_star - r, 0.0) / (1.0 - alpha));
  return out;
}

namespace {

void normalize_mean_one(std::vector<double>& w) {
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  for (double& x : w) x /= mean;
}

}  // namespace

std::vector<double> cvar_weights(std::span<const double> returns, double alpha) {
  const auto s = cvar_shaping(returns, alpha);
  std::vector<double> w;
  w.reserve(returns.size());
  for (double r : returns) w.push_back(r <= s.xi_star ? 1.0 / (1.0 - alpha) : 1.0);
  normalize_mean_one(w);
  return w;
}

std::vector<double> entropic_weights(std::span<const double> returns, double theta) {
  if (returns.empty()) throw InputError("entropic_weights: no episode returns");
  if (!std::isfinite(theta)) throw InputError("entropic_weights: theta not finite");
  double shift = -std::numeric_limits<double>::infinity();
  for (double r : returns) shift = std::max(shift, -theta * r);
  std::vector<double> w;
  w.reserve(returns.size());
  for (double r : returns) w.push_back(std::exp(-theta * r - shift));
  normalize_mean_one(w);
  return w;
}

void RolloutBuffer::clear() {
  obs.clear();
  action.clear();
  logp_old.clear();
  reward.clear();
  value.clear();
  done.clear();
  episode.clear();
  episode_return.clear();
}

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::vector<UpdateStats> ppo_update(PolicyParams& params, const RolloutBuffer& buffer,
                                    std::span<const double> advantages, std::span<const double> targets,
                                    std::span<const double> step_weights, const TrainConfig& config,
                                    bool learn_sigma, bool learn_critic) {
  const std::size_t n = buffer.size();
  if (n == 0) throw InputError("ppo_update: empty buffer");
  if (advantages.size() != n || step_weights.size() != n || (learn_critic && targets.size() != n)) {
    throw ShapeError("ppo_update: advantages, targets and weights must match the buffer length");
  }
  const double eps = config.clip_eps;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> gW(params.W.size()), gls(params.log_sigma.size()), gv(params.v.size());
  std::vector<UpdateStats> stats;
  stats.reserve(static_cast<std::size_t>(config.n_ppo));

  for (int it = 0; it < config.n_ppo; ++it) {
    std::fill(gW.begin(), gW.end(), 0.0);
    std::fill(gls.begin(), gls.end(), 0.0);
    std::fill(gv.begin(), gv.end(), 0.0);
    UpdateStats st;
    double surrogate = 0.0, ratio_sum = 0.0, vloss = 0.0;

    for (std::size_t t = 0; t < n; ++t) {
      const auto x = buffer.x(t);
      const double ratio = std::exp(log_prob(params, x, buffer.action[t]) - buffer.logp_old[t]);
      const double a = advantages[t];
      const double w = step_weights[t];
      const double unclipped = ratio * a;
      const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * a;
      ratio_sum += ratio;
      if (unclipped <= clipped) {
        surrogate += w * unclipped;
        // d(ratio)/dθ = ratio · ∇log π
        add_log_prob_grad(params, x, buffer.action[t], inv_n * w * a * ratio, gW, gls);
      } else {
        surrogate += w * clipped;
      }
      if (learn_critic) {
        const double err = value(params, x) - targets[t];
        vloss += err * err;
        for (std::size_t i = 0; i < kFeatureDim; ++i) gv[i] += 2.0 * inv_n * err * x[i];
      }
    }

    double l2 = 0.0;
    for (std::size_t i = 0; i < params.W.size(); ++i) {
      l2 += params.W[i] * params.W[i];
      gW[i] -= 2.0 * config.l2 * params.W[i];
    }
    for (double& g : gls) g += config.entropy_coef;  // dH/d log_sigma = 1

    st.entropy = entropy(params);
    st.mean_ratio = ratio_sum * inv_n;
    st.ratio_alarm = st.mean_ratio < 1.0 - 3.0 * eps || st.mean_ratio > 1.0 + 3.0 * eps;
    st.policy_loss = -(surrogate * inv_n + config.entropy_coef * st.entropy - config.l2 * l2);
    st.value_loss = learn_critic ? vloss * inv_n : 0.0;

    if (!all_finite(gW) || !all_finite(gls) || !all_finite(gv) || !std::isfinite(st.policy_loss) ||
        !std::isfinite(st.value_loss)) {
      throw TrainingError(fmt::format("non-finite gradient at PPO step {} (policy loss {}, value loss {})", it + 1,
                                      st.policy_loss, st.value_loss));
    }
    for (std::size_t i = 0; i < params.W.size(); ++i) params.W[i] += config.lr * gW[i];
    if (learn_sigma) {
      for (std::size_t i = 0; i < gls.size(); ++i) params.log_sigma[i] += config.lr * gls[i];
    }
    if (learn_critic) {
      for (std::size_t i = 0; i < gv.size(); ++i) params.v[i] -= config.value_lr * gv[i];
    }
    stats.push_back(st);
  }
  return stats;
}

namespace {

ModelInputs finish_inputs(const Dataset& data, FeatureMatrix m, const Normalizer& normalizer,
                          std::span<const AblationGroup> ablate) {
  for (std::size_t t = kFeatureWarmup; t < m.rows(); ++t) {
    normalizer.apply_inplace(m.row(t));
    apply_ablation(m.row(t), ablate);
  }
  ModelInputs in;
  in.data = std::make_shared<const Dataset>(data);
  in.features = std::make_shared<const FeatureMatrix>(std::move(m));
  in.normalizer = normalizer;
  return in;
}

}  // namespace

ModelInputs prepare_inputs(const Dataset& data, const FeatureOptions& options, std::size_t fit_end,
                           std::span<const AblationGroup> ablate) {
  auto m = build_feature_matrix(data, options);
  const auto normalizer = fit_normalizer(m, kFeatureWarmup, fit_end);
  return finish_inputs(data, std::move(m), normalizer, ablate);
}

ModelInputs prepare_inputs(const Dataset& data, const FeatureOptions& options, const Normalizer& normalizer,
                           std::span<const AblationGroup> ablate) {
  return finish_inputs(data, build_feature_matrix(data, options), normalizer, ablate);
}

std::vector<std::size_t> episode_starts_in(const Dataset& data, std::size_t first_row, std::size_t end_row) {
  std::vector<std::size_t> out;
  end_row = std::min(end_row, data.size());
  for (std::size_t t = std::max<std::size_t>(first_row, kFeatureWarmup); t + kRoundsPerEpisode <= end_row; ++t) {
    if (hour_of_day(data.market[t].timestamp) == 0) out.push_back(t);
  }
  return out;
}

double alg1_hour_reward(const Dataset& data, std::size_t row, double a_rec, const ExecParams& exec) {
  const auto& m = data.market[row];
  const auto& p = data.pv[row];
  PeriodInputs in;
  in.p_bid = m.p_id_bid;
  in.p_ask = m.p_id_ask;
  in.p_im = data.market[row - 1].p_im;
  in.g_da = p.g_da;
  in.g_hat = p.forecast_1h;
  in.g_act = p.g_act;
  in.depth_ask_cap = m.bid_depth;
  in.depth_buy_cap = m.ask_depth;
  in.a_rec = a_rec;
  const auto r = execute_period(in, exec, DecisionBasis::ex_ante);
  in.p_im = m.p_im;
  return stage_profit(r.q_ask, r.q_buy, r.e, in, exec);
}

double evaluate_mean_return(const ModelInputs& inputs, const EnvConfig& env_config, const PolicyParams& params,
                            TrainMode mode, std::span<const std::size_t> starts, std::uint64_t draw_seed) {
  if (starts.empty()) return 0.0;
  const auto box = action_box(env_config);
  double total = 0.0;
  if (mode == TrainMode::alg1) {
    for (auto s : starts) {
      for (int k = 0; k < kRoundsPerEpisode; ++k) {
        const std::size_t row = s + static_cast<std::size_t>(k);
        const auto a = mean_action(params, inputs.features->row(row), box);
        total += alg1_hour_reward(*inputs.data, row, a.q, env_config.exec);
      }
    }
  } else {
    Environment env(inputs.data, inputs.features, env_config);
    for (auto s : starts) {
      env.reset(s);
      while (!env.done()) {
        const auto a = mean_action(params, env.observation(), box);
        total += env.step(a, matched_draws(draw_seed, env.state().hour)).reward;
      }
    }
  }
  return total / static_cast<double>(starts.size());
}

namespace {

struct Rollout {
  RolloutBuffer buffer;
  std::vector<double> advantages;
  std::vector<double> targets;
  std::vector<double> weights;
};

class EpisodeCycler {
 public:
  EpisodeCycler(std::span<const std::size_t> starts, std::mt19937_64& rng)
      : order_(starts.begin(), starts.end()), rng_(rng) {
    reshuffle();
  }
  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

void push_step(RolloutBuffer& b, std::span<const double> x, const ActionVector& a, double logp, double r,
               double v, bool done, std::size_t ep) {
  b.obs.insert(b.obs.end(), x.begin(), x.end());
  b.action.push_back(a);
  b.logp_old.push_back(logp);
  b.reward.push_back(r);
  b.value.push_back(v);
  b.done.push_back(done ? 1 : 0);
  b.episode.push_back(ep);
}

std::vector<double> per_step_weights(const RolloutBuffer& b, const RiskConfig& risk) {
  std::vector<double> ep_w(b.episode_return.size(), 1.0);
  if (risk.mode == RiskMode::cvar) {
    ep_w = cvar_weights(b.episode_return, risk.alpha);
  } else if (risk.mode == RiskMode::entropic) {
    ep_w = entropic_weights(b.episode_return, risk.theta);
  }
  std::vector<double> w(b.size());
  for (std::size_t t = 0; t < b.size(); ++t) w[t] = ep_w[b.episode[t]];
  return w;
}

void normalize(std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  for (double& x : xs) x = sd > 1e-12 ? (x - mean) / sd : x - mean;
}

Rollout collect_alg1(const ModelInputs& in, const EnvConfig& env, const PolicyParams& params,
                     const TrainConfig& cfg, EpisodeCycler& days, std::mt19937_64& rng) {
  Rollout ro;
  auto& b = ro.buffer;
  const auto box = action_box(env);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int episodes = (cfg.steps_per_epoch + kRoundsPerEpisode - 1) / kRoundsPerEpisode;
  for (int e = 0; e < episodes; ++e) {
    const std::size_t s = days.next();
    const std::size_t first = b.size();
    for (int k = 0; k < kRoundsPerEpisode; ++k) {
      const std::size_t row = s + static_cast<std::size_t>(k);
      const auto x = in.features->row(row);
      const double z[1] = {normal(rng)};
      const auto smp = sample_action(params, x, z, box);
      const double r = alg1_hour_reward(*in.data, row, smp.action.q, env.exec);
      push_step(b, x, smp.pre_clip, log_prob(params, x, smp.pre_clip), r, 0.0, k + 1 == kRoundsPerEpisode,
                static_cast<std::size_t>(e));
    }
    // Monte-Carlo returns within the day.
    ro.advantages.resize(b.size());
    double g = 0.0;
    for (std::size_t t = b.size(); t-- > first;) {
      g = b.reward[t] + cfg.gamma * g;
      ro.advantages[t] = g;
    }
    b.episode_return.push_back(g);
  }
  ro.targets.assign(b.size(), 0.0);
  ro.weights.assign(b.size(), 1.0);
  return ro;
}

Rollout collect_alg2(const ModelInputs& in, const EnvConfig& env_config, const PolicyParams& params,
                     const TrainConfig& cfg, EpisodeCycler& days, std::mt19937_64& rng) {
  Rollout ro;
  auto& b = ro.buffer;
  const auto box = action_box(env_config);
  Environment env(in.data, in.features, env_config);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int episodes = (cfg.steps_per_epoch + kRoundsPerEpisode - 1) / kRoundsPerEpisode;
  for (int e = 0; e < episodes; ++e) {
    env.reset(days.next());
    const std::size_t first = b.size();
    while (!env.done()) {
      const auto x = env.observation();
      const double z[2] = {normal(rng), normal(rng)};
      const auto smp = sample_action(params, x, z, box);
      StepDraws d;
      d.fill_u = uniform(rng);
      d.mid_normal = normal(rng);
      d.jump_normal = normal(rng);
      const double lp = log_prob(params, x, smp.pre_clip);
      const double v = value(params, x);
      const auto out = env.step(smp.action, d);
      push_step(b, x, smp.pre_clip, lp, out.reward, v, out.done, static_cast<std::size_t>(e));
    }
    std::vector<double> values(b.value.begin() + static_cast<std::ptrdiff_t>(first), b.value.end());
    values.push_back(0.0);
    const std::span<const double> rewards(b.reward.data() + first, b.size() - first);
    const auto gae = compute_gae(rewards, values, cfg.gamma, cfg.lambda_gae);
    ro.advantages.insert(ro.advantages.end(), gae.advantages.begin(), gae.advantages.end());
    ro.targets.insert(ro.targets.end(), gae.targets.begin(), gae.targets.end());
    double g = 0.0;
    for (std::size_t t = b.size(); t-- > first;) g = b.reward[t] + cfg.gamma * g;
    b.episode_return.push_back(g);
  }
  ro.weights = per_step_weights(b, cfg.risk);
  return ro;
}

}  // namespace

TrainResult train(const ModelInputs& inputs, std::span<const std::size_t> starts, const EnvConfig& env,
                  const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  env.validate();
  if (starts.empty()) throw InputError("train: no training episodes");
  TrainResult res;
  const int action_dim = config.mode == TrainMode::alg1 ? 1 : 2;
  res.params = PolicyParams::zeros(action_dim, config.sigma_init);
  std::mt19937_64 rng(seed);
  EpisodeCycler days(starts, rng);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    try {
      Rollout ro = config.mode == TrainMode::alg1 ? collect_alg1(inputs, env, res.params, config, days, rng)
                                                  : collect_alg2(inputs, env, res.params, config, days, rng);
      if (config.normalize_advantages) normalize(ro.advantages);
      const bool alg2 = config.mode == TrainMode::alg2;
      const auto stats = ppo_update(res.params, ro.buffer, ro.advantages, ro.targets, ro.weights, config, alg2, alg2);
      CurvePoint cp;
      cp.epoch = epoch;
      cp.seed = seed;
      cp.mean_return = evaluate_mean_return(inputs, env, res.params, config.mode, starts, seed);
      cp.policy_loss = stats.front().policy_loss;
      cp.value_loss = stats.back().value_loss;
      cp.mean_ratio = stats.back().mean_ratio;
      cp.entropy = stats.back().entropy;
      res.curve.push_back(cp);
    } catch (const Error& e) {
      throw TrainingError(fmt::format("seed {} epoch {}: {}", seed, epoch, e.what()));
    }
  }
  return res;
}

TrainedModel train_model(const Dataset& data, std::size_t train_end, const FeatureOptions& features,
                         std::span<const AblationGroup> ablate, const EnvConfig& env, const TrainConfig& config,
                         std::uint64_t seed) {
  const auto inputs = prepare_inputs(data, features, train_end, ablate);
  const auto starts = episode_starts_in(data, 0, train_end);
  auto res = train(inputs, starts, env, config, seed);
  TrainedModel m;
  m.seed = seed;
  m.mode = config.mode;
  m.features = features;
  m.ablate.assign(ablate.begin(), ablate.end());
  m.normalizer = inputs.normalizer;
  m.params = std::move(res.params);
  m.curve = std::move(res.curve);
  return m;
}

}  // namespace pvtrade
