#include "pvtrade/mdp_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "pvtrade/csv_io.hpp"
#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double forecast_error_std(const Dataset& d, std::size_t t) {
  const std::size_t first = t >= kFeatureWarmup ? t - kFeatureWarmup : 0;
  if (t == first) return 0.0;
  const double n = static_cast<double>(t - first);
  double mean = 0.0;
  for (std::size_t k = first; k < t; ++k) mean += d.pv[k].forecast_1h - d.pv[k].g_act;
  mean /= n;
  double ss = 0.0;
  for (std::size_t k = first; k < t; ++k) {
    const double e = d.pv[k].forecast_1h - d.pv[k].g_act - mean;
    ss += e * e;
  }
  return std::sqrt(ss / n);
}

}  // namespace

std::string to_string(QuoteSource q) { return q == QuoteSource::dataset ? "dataset" : "simulated"; }

QuoteSource quote_source_from_string(const std::string& s) {
  if (s == "dataset") return QuoteSource::dataset;
  if (s == "simulated") return QuoteSource::simulated;
  throw InputError("expected dataset or simulated, got '" + s + "'");
}

double midprice_step(double m, double m_bar, const MidpriceParams& p, double diffusion_draw,
                     double jump_draw) {
  constexpr double dt = 1.0;
  return m + p.kappa_rev * (m_bar - m) * dt + p.nu * std::sqrt(dt) * diffusion_draw + p.jump_std * jump_draw;
}

double midprice_stationary_variance(const MidpriceParams& p) {
  const double k = p.kappa_rev;
  if (k <= 0.0 || k >= 2.0) return std::numeric_limits<double>::infinity();
  return (p.nu * p.nu + p.jump_std * p.jump_std) / (2.0 * k * (1.0 - 0.5 * k));
}

double discount_horizon(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError(fmt::format("discount factor {} outside (0, 1)", gamma));
  }
  return 1.0 / (1.0 - gamma);
}

void EnvConfig::validate() const {
  if (!(q_lo <= 0.0 && q_hi >= 0.0)) throw ConfigError("env.q_lo", "volume box must contain 0");
  if (!(delta_lo <= delta_hi)) throw ConfigError("env.delta_lo", "must be <= env.delta_hi");
  if (!(lambda_inv >= 0.0)) throw ConfigError("env.lambda_inv", "must be >= 0");
  if (!(midprice.kappa_rev >= 0.0)) throw ConfigError("env.midprice.kappa_rev", "must be >= 0");
  if (!(midprice.nu >= 0.0)) throw ConfigError("env.midprice.nu", "must be >= 0");
  exec.validate();
  fill.validate();
}

StepDraws matched_draws(std::uint64_t seed, HourIndex hour) {
  std::mt19937_64 rng(mix(mix(seed) ^ static_cast<std::uint64_t>(hour)));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  StepDraws d;
  d.fill_u = uni(rng);
  d.mid_normal = normal(rng);
  d.jump_normal = normal(rng);
  return d;
}

Environment::Environment(std::shared_ptr<const Dataset> data, std::shared_ptr<const FeatureMatrix> features,
                         EnvConfig config)
    : data_(std::move(data)), features_(std::move(features)), config_(std::move(config)) {
  config_.validate();
  if (!data_ || !features_) throw InputError("environment needs data and features");
  if (features_->rows() != data_->size()) {
    throw ShapeError(fmt::format("feature rows {} != data rows {}", features_->rows(), data_->size()));
  }
}

Book Environment::book_at(std::size_t row, double mid) const {
  const auto& m = data_->market[row];
  Book b{m.p_id_bid, m.p_id_ask, m.bid_depth, m.ask_depth};
  if (config_.quote_source == QuoteSource::simulated) {
    const double half = 0.5 * (m.p_id_ask - m.p_id_bid);
    b.bid = mid - half;
    b.ask = mid + half;
  }
  return b;
}

MdpState Environment::make_state(std::size_t row, int tau, double mid) const {
  const auto& m = data_->market[row];
  const auto& p = data_->pv[row];
  const auto& prev = data_->market[row - 1];
  MdpState s;
  s.hour = m.timestamp;
  s.g_hat = p.forecast_1h;
  s.g_da = p.g_da;
  s.x = s.g_hat - s.g_da;
  s.sigma = forecast_error_std(*data_, row);
  s.p_da = m.p_da;
  s.m = mid;
  s.book = book_at(row, mid);
  s.p_im_last = prev.p_im;
  s.regulation_last = prev.regulation_state;
  s.tau = tau;
  return s;
}

const MdpState& Environment::reset(std::size_t first_row) {
  if (first_row < kFeatureWarmup) {
    throw WindowError(fmt::format("episode at row {} lacks {} h of warm-up", first_row, kFeatureWarmup));
  }
  if (first_row + kRoundsPerEpisode > data_->size()) {
    throw WindowError(fmt::format("episode at row {} runs past the dataset end", first_row));
  }
  first_row_ = first_row;
  row_ = first_row;
  double mean_da = 0.0;
  for (int k = 0; k < kRoundsPerEpisode; ++k) mean_da += data_->market[first_row + k].p_da;
  m_bar_ = mean_da / kRoundsPerEpisode;
  const auto& m0 = data_->market[first_row];
  state_ = make_state(first_row, kRoundsPerEpisode, 0.5 * (m0.p_id_bid + m0.p_id_ask));
  done_ = false;
  return state_;
}

std::span<const double, kFeatureDim> Environment::observation() const { return features_->row(row_); }

Foresight Environment::foresight(const StepDraws& draws) const {
  return {data_->pv[row_].g_act, data_->market[row_].p_im, draws};
}

TradeCaps Environment::caps() const {
  return effective_caps(state_.g_hat, state_.g_da, state_.book.bid_depth, state_.book.ask_depth);
}

StepOutcome Environment::step(const MdpAction& action, const StepDraws& draws) {
  if (done_) throw LifecycleError("step called on a finished episode; call reset first");

  const double q_req = std::clamp(action.q, config_.q_lo, config_.q_hi);
  const double delta = std::clamp(action.delta, config_.delta_lo, config_.delta_hi);
  const auto& s = state_;
  const auto caps_now = caps();

  double q_int = 0.0;
  if (config_.route_through_executor) {
    PeriodInputs in;
    in.p_bid = s.book.bid;
    in.p_ask = s.book.ask;
    in.p_im = s.p_im_last;
    in.g_da = s.g_da;
    in.g_hat = s.g_hat;
    in.g_act = s.g_hat;
    in.depth_ask_cap = s.book.bid_depth;
    in.depth_buy_cap = s.book.ask_depth;
    in.a_rec = q_req;
    q_int = execute_period_with_caps(in, caps_now, config_.exec, DecisionBasis::ex_ante).net();
  } else {
    q_int = std::clamp(q_req, -caps_now.buy, caps_now.ask);
  }

  StepOutcome out;
  if (q_int != 0.0) {
    const Fill f = limit_fill(q_int, delta, s.book, draws.fill_u, config_.fill);
    out.executed = f.filled;
    out.price = f.price;
    out.order_type = f.type;
    out.traded = f.filled != 0.0;
    const double side_depth = f.filled > 0.0 ? s.book.bid_depth : s.book.ask_depth;
    out.cost = trading_cost(f.filled, side_depth, config_.exec);
  }
  const auto& pv = data_->pv[row_];
  const auto& mk = data_->market[row_];
  out.cash = out.executed * out.price - out.cost;
  out.residual = pv.g_act - pv.g_da - out.executed;
  out.settlement = terminal_settlement(out.residual, mk.p_im);
  const double x_post = s.x - out.executed;
  out.shaping = -config_.lambda_inv * s.p_im_last * x_post;
  out.reward = out.cash + out.settlement + out.shaping;
  out.da_revenue = mk.p_da * pv.g_da;

  const int tau_next = s.tau - 1;
  out.done = tau_next == 0;
  if (!out.done) {
    const std::size_t next = row_ + 1;
    double mid = 0.0;
    if (config_.quote_source == QuoteSource::simulated) {
      mid = midprice_step(s.m, m_bar_, config_.midprice, draws.mid_normal, draws.jump_normal);
    } else {
      const auto& mn = data_->market[next];
      mid = 0.5 * (mn.p_id_bid + mn.p_id_ask);
    }
    MdpState ns = make_state(next, tau_next, mid);
    out.forecast_update = x_post - ns.x;
    row_ = next;
    state_ = ns;
  } else {
    MdpState ns = s;
    ns.tau = 0;
    ns.x = 0.0;
    out.forecast_update = x_post;
    state_ = ns;
    done_ = true;
  }
  out.next_state = state_;
  return out;
}

std::vector<std::size_t> Environment::episode_starts() const {
  std::vector<std::size_t> out;
  const auto n = data_->size();
  for (std::size_t t = kFeatureWarmup; t + kRoundsPerEpisode <= n; ++t) {
    if (hour_of_day(data_->market[t].timestamp) == 0) out.push_back(t);
  }
  return out;
}

double Environment::reward_bound() const {
  double price = 0.0, p_im = 0.0, min_depth = std::numeric_limits<double>::infinity(), dev = 0.0;
  for (std::size_t t = 0; t < data_->size(); ++t) {
    const auto& m = data_->market[t];
    const auto& p = data_->pv[t];
    price = std::max({price, std::abs(m.p_id_bid), std::abs(m.p_id_ask)});
    p_im = std::max(p_im, std::abs(m.p_im));
    for (double d : {m.bid_depth, m.ask_depth}) {
      if (d > 0.0) min_depth = std::min(min_depth, d);
    }
    dev = std::max({dev, std::abs(p.forecast_1h - p.g_da), std::abs(p.g_act - p.g_da)});
  }
  price += std::max(std::abs(config_.delta_lo), std::abs(config_.delta_hi));
  const double q = std::max({std::abs(config_.q_lo), std::abs(config_.q_hi), dev});
  const double cost = config_.exec.imp_alpha * q + config_.exec.imp_beta * q * q / min_depth;
  return q * price + cost + p_im * (2.0 * dev + q) + config_.lambda_inv * p_im * (dev + q);
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                          const std::string& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "episode,t,tau,x,g_hat,sigma,p_da,m,bid,ask,bid_depth,ask_depth,p_im_last,regulation_last,"
         "q,delta,executed,price,order_type,cost,residual,settlement,shaping,reward\n";
  for (std::size_t e = 0; e < trajectories.size(); ++e) {
    for (const auto& st : trajectories[e]) {
      const auto& s = st.state;
      const auto& o = st.outcome;
      out << e << ',' << format_iso_hour(s.hour) << ',' << s.tau << ',' << format_number(s.x) << ','
          << format_number(s.g_hat) << ',' << format_number(s.sigma) << ',' << format_number(s.p_da) << ','
          << format_number(s.m) << ',' << format_number(s.book.bid) << ',' << format_number(s.book.ask)
          << ',' << format_number(s.book.bid_depth) << ',' << format_number(s.book.ask_depth) << ','
          << format_number(s.p_im_last) << ',' << to_string(s.regulation_last) << ','
          << format_number(st.action.q) << ',' << format_number(st.action.delta) << ','
          << format_number(o.executed) << ',' << format_number(o.price) << ','
          << (o.traded ? (o.order_type == OrderType::market ? "market" : "limit") : "none") << ','
          << format_number(o.cost) << ',' << format_number(o.residual) << ','
          << format_number(o.settlement) << ',' << format_number(o.shaping) << ','
          << format_number(o.reward) << '\n';
    }
  }
}

}  // namespace pvtrade
