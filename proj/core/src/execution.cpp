#include "pvtrade/execution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace {

bool finite(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

double imbalance_basis(const PeriodInputs& in, DecisionBasis basis) {
  return (basis == DecisionBasis::ex_ante ? in.g_hat : in.g_act) - in.g_da;
}

/// Maximizer on [0, cap] of  slope·q − curvature/2·q², where curvature >= 0.
double argmax_concave(double slope, double curvature, double cap) {
  if (cap <= 0.0) return 0.0;
  if (curvature <= 0.0) return slope > 0.0 ? cap : 0.0;
  return std::clamp(slope / curvature, 0.0, cap);
}

}  // namespace

void ExecParams::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("execution.alpha", "must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("execution.beta", "must be >= 0");
  if (!(kappa >= 0.0)) throw ConfigError("execution.kappa", "must be >= 0");
  if (!(imp_alpha >= 0.0)) throw ConfigError("execution.imp_alpha", "must be >= 0");
  if (!(imp_beta >= 0.0)) throw ConfigError("execution.imp_beta", "must be >= 0");
}

void FillParams::validate() const {
  if (!(c1 >= 0.0)) throw ConfigError("fill.c1", "must be >= 0");
  if (!(depth_ref > 0.0)) throw ConfigError("fill.depth_ref", "must be > 0");
}

TradeCaps effective_caps(double g_hat, double g_da, double depth_ask_cap, double depth_buy_cap) {
  const double surplus = std::max(g_hat - g_da, 0.0);
  const double shortfall = std::max(g_da - g_hat, 0.0);
  return {std::min(surplus, std::max(depth_ask_cap, 0.0)), std::min(shortfall, std::max(depth_buy_cap, 0.0))};
}

double period_objective(double q_ask, double q_buy, const PeriodInputs& in, const ExecParams& p,
                        DecisionBasis basis) {
  const double e = imbalance_basis(in, basis) - q_ask + q_buy;
  return stage_profit(q_ask, q_buy, e, in, p);
}

double stage_profit(double q_ask, double q_buy, double e, const PeriodInputs& in, const ExecParams& p) {
  const double vol = q_ask + q_buy;
  const double track = q_ask - q_buy - in.a_rec;
  return in.p_bid * q_ask - in.p_ask * q_buy + in.p_im * e - 0.5 * p.alpha * vol * vol -
         0.5 * p.beta * e * e - 0.5 * p.kappa * track * track;
}

ExecutionResult execute_period_with_caps(const PeriodInputs& in, const TradeCaps& caps,
                                         const ExecParams& p, DecisionBasis basis) {
  const double delta = imbalance_basis(in, basis);
  const double curvature = p.alpha + p.beta + p.kappa;

  // Sell branch (z = 1): d/dq of the objective at q = 0 and its curvature.
  const double sell_slope = in.p_bid - in.p_im + p.beta * delta + p.kappa * in.a_rec;
  const double q_sell = argmax_concave(sell_slope, curvature, caps.ask);
  // Buy branch (z = 0).
  const double buy_slope = in.p_im - in.p_ask - p.beta * delta - p.kappa * in.a_rec;
  const double q_buy = argmax_concave(buy_slope, curvature, caps.buy);

  const double j_none = period_objective(0.0, 0.0, in, p, basis);
  const double j_sell = period_objective(q_sell, 0.0, in, p, basis);
  const double j_buy = period_objective(0.0, q_buy, in, p, basis);

  ExecutionResult r;
  if (j_sell > j_none && j_sell > j_buy) {
    r.q_ask = q_sell;
    r.z = 1;
  } else if (j_buy > j_none && j_buy > j_sell) {
    r.q_buy = q_buy;
    r.z = 0;
  }
  r.e = in.g_act - in.g_da - r.q_ask + r.q_buy;
  r.stage_profit = stage_profit(r.q_ask, r.q_buy, r.e, in, p);
  return r;
}

ExecutionResult execute_period(const PeriodInputs& in, const ExecParams& p, DecisionBasis basis) {
  const auto caps = effective_caps(in.g_hat, in.g_da, in.depth_ask_cap, in.depth_buy_cap);
  return execute_period_with_caps(in, caps, p, basis);
}

double trading_cost(double q, double depth, const ExecParams& p) {
  if (q == 0.0) return 0.0;
  if (!(depth > 0.0)) throw InputError("trading_cost: non-positive depth with nonzero volume");
  return p.imp_alpha * std::abs(q) + p.imp_beta * q * q / depth;
}

double fill_probability(double delta, double contra_depth, const FillParams& p) {
  const double z = p.c0 - p.c1 * delta + p.c2 * (contra_depth / p.depth_ref);
  return 1.0 / (1.0 + std::exp(-z));
}

double max_filling_offset(double u, double contra_depth, const FillParams& p) {
  if (u <= 0.0) return std::numeric_limits<double>::infinity();
  const double logit_u = std::log(u / (1.0 - u));
  if (p.c1 == 0.0) {
    return fill_probability(0.0, contra_depth, p) > u ? std::numeric_limits<double>::infinity()
                                                       : -std::numeric_limits<double>::infinity();
  }
  return (p.c0 + p.c2 * (contra_depth / p.depth_ref) - logit_u) / p.c1;
}

Fill limit_fill(double q, double delta, const Book& book, double u, const FillParams& p) {
  if (!finite({q, delta, book.bid, book.ask, book.bid_depth, book.ask_depth, u})) {
    throw InputError("limit_fill: non-finite input");
  }
  if (q == 0.0) throw InputError("limit_fill: zero order size");
  if (u < 0.0 || u >= 1.0) throw InputError("limit_fill: uniform draw outside [0,1)");

  const bool sell = q > 0.0;
  const double contra_depth = sell ? book.bid_depth : book.ask_depth;
  const double quote = sell ? book.bid : book.ask;
  const double sign = sell ? 1.0 : -1.0;

  Fill f;
  if (delta <= 0.0) {
    f.type = OrderType::market;
    f.filled = sign * std::min(std::abs(q), std::max(contra_depth, 0.0));
    f.price = quote;
    return f;
  }
  f.type = OrderType::limit;
  f.price = quote + sign * delta;
  f.filled = u < fill_probability(delta, contra_depth, p) ? q : 0.0;
  return f;
}

}  // namespace pvtrade
