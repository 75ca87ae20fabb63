#include "pvtrade/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pvtrade/errors.hpp"

namespace pvtrade {

std::string to_string(BaselineVariant v) {
  switch (v) {
    case BaselineVariant::spot_only: return "spot_only";
    case BaselineVariant::forecast_tracking: return "forecast_tracking";
    case BaselineVariant::sign_spread: return "sign_spread";
    case BaselineVariant::oracle: return "oracle";
  }
  return "spot_only";
}

BaselineVariant baseline_from_string(const std::string& s) {
  if (s == "spot_only") return BaselineVariant::spot_only;
  if (s == "forecast_tracking") return BaselineVariant::forecast_tracking;
  if (s == "sign_spread") return BaselineVariant::sign_spread;
  if (s == "oracle") return BaselineVariant::oracle;
  throw InputError("unknown baseline '" + s + "'");
}

namespace {

MdpAction tracking(const MdpState& s, const TradeCaps& caps) {
  return {std::clamp(s.x, -caps.buy, caps.ask), 0.0};
}

/// Largest admissible passive offset that still fills under draw `u`, or 0
/// (cross the spread) when no positive offset fills.
double best_offset(double u, double contra_depth, const EnvConfig& env) {
  if (env.delta_hi <= 0.0) return 0.0;
  const double dmax = max_filling_offset(u, contra_depth, env.fill);
  if (!(dmax > 0.0)) return 0.0;
  double d = std::min(env.delta_hi, dmax - 1e-9 * std::max(1.0, std::abs(dmax)));
  if (d <= 0.0 || !(u < fill_probability(d, contra_depth, env.fill))) return 0.0;
  return d;
}

struct SideChoice {
  double q = 0.0;
  double delta = 0.0;
  double profit = -std::numeric_limits<double>::infinity();  // side unavailable
};

}  // namespace

MdpAction oracle_action(const MdpState& s, const TradeCaps& caps, const Foresight& f, const EnvConfig& env) {
  PeriodInputs base;
  base.p_im = f.p_im;
  base.g_da = s.g_da;
  base.g_hat = s.g_hat;
  base.g_act = f.g_act;
  const double j_none = period_objective(0.0, 0.0, base, ExecParams{0, 0, 0, 0, 0}, DecisionBasis::ex_post);

  SideChoice sell, buy;
  if (caps.ask > 0.0 && s.book.bid_depth > 0.0) {
    sell.delta = best_offset(f.draws.fill_u, s.book.bid_depth, env);
    PeriodInputs in = base;
    in.p_bid = s.book.bid + sell.delta - env.exec.imp_alpha;
    in.p_ask = s.book.ask;
    const ExecParams p{2.0 * env.exec.imp_beta / s.book.bid_depth, 0.0, 0.0, 0.0, 0.0};
    const auto r = execute_period_with_caps(in, {caps.ask, 0.0}, p, DecisionBasis::ex_post);
    sell.q = r.q_ask;
    sell.profit = r.stage_profit;
  }
  if (caps.buy > 0.0 && s.book.ask_depth > 0.0) {
    buy.delta = best_offset(f.draws.fill_u, s.book.ask_depth, env);
    PeriodInputs in = base;
    in.p_bid = s.book.bid;
    in.p_ask = s.book.ask - buy.delta + env.exec.imp_alpha;
    const ExecParams p{2.0 * env.exec.imp_beta / s.book.ask_depth, 0.0, 0.0, 0.0, 0.0};
    const auto r = execute_period_with_caps(in, {0.0, caps.buy}, p, DecisionBasis::ex_post);
    buy.q = r.q_buy;
    buy.profit = r.stage_profit;
  }
  if (sell.q > 0.0 && sell.profit > j_none && sell.profit >= buy.profit) return {sell.q, sell.delta};
  if (buy.q > 0.0 && buy.profit > j_none) return {-buy.q, buy.delta};
  return {};
}

MdpAction baseline_action(const BaselineKind& kind, const MdpState& s, const TradeCaps& caps,
                          const Foresight* foresight, const EnvConfig& env) {
  switch (kind.variant) {
    case BaselineVariant::spot_only: return {};
    case BaselineVariant::forecast_tracking: return tracking(s, caps);
    case BaselineVariant::sign_spread:
      return s.book.ask - s.book.bid <= kind.threshold ? tracking(s, caps) : MdpAction{};
    case BaselineVariant::oracle:
      if (foresight == nullptr) throw InputError("oracle baseline needs the realized hour (foresight)");
      return oracle_action(s, caps, *foresight, env);
  }
  return {};
}

}  // namespace pvtrade
