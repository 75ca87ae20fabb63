#pragma once

namespace pvtrade {

/// Penalty weights of the per-period trade objective plus the impact model.
struct ExecParams {
  double alpha = 0.5;      ///< trade-size penalty, €/MWh²
  double beta = 0.2;       ///< residual-imbalance penalty, €/MWh²
  double kappa = 1.0;      ///< recommendation-tracking penalty, €/MWh²
  double imp_alpha = 0.5;  ///< linear fee, €/MWh
  double imp_beta = 1.0;   ///< impact coefficient, € per MWh² per MWh of depth

  void validate() const;
};

struct PeriodInputs {
  double p_bid = 0.0;
  double p_ask = 0.0;
  double p_im = 0.0;
  double g_da = 0.0;
  double g_hat = 0.0;
  double g_act = 0.0;
  double depth_ask_cap = 0.0;  ///< liquidity available for selling
  double depth_buy_cap = 0.0;  ///< liquidity available for buying
  double a_rec = 0.0;          ///< recommended net action (+ sell)
};

struct ExecutionResult {
  double q_ask = 0.0;
  double q_buy = 0.0;
  int z = 0;             ///< 1: sell side active, 0: buy side or no trade
  double e = 0.0;        ///< realized residual imbalance
  double stage_profit = 0.0;

  double net() const noexcept { return q_ask - q_buy; }
};

struct TradeCaps {
  double ask = 0.0;
  double buy = 0.0;
};

/// Big-M bounds: forecast surplus/shortfall capped by the book depth.
TradeCaps effective_caps(double g_hat, double g_da, double depth_ask_cap, double depth_buy_cap);

/// Which generation figure drives the imbalance term inside the decision.
/// `ex_ante` decides on the forecast (g_hat); `ex_post` on g_act.
enum class DecisionBasis { ex_ante, ex_post };

/// Objective of one period for a candidate trade, with the imbalance taken
/// on `basis`.
double period_objective(double q_ask, double q_buy, const PeriodInputs& in, const ExecParams& p,
                        DecisionBasis basis);

/// Exact maximizer of the one-period objective over the one-sided feasible
/// set, found by enumerating the side binary and solving each concave branch
/// in closed form. Ties are resolved toward no trade. The returned `e` and
/// `stage_profit` are realized values computed with g_act.
ExecutionResult execute_period(const PeriodInputs& in, const ExecParams& p,
                               DecisionBasis basis = DecisionBasis::ex_ante);

/// Same, against caller-supplied caps instead of `effective_caps`.
ExecutionResult execute_period_with_caps(const PeriodInputs& in, const TradeCaps& caps,
                                         const ExecParams& p, DecisionBasis basis);

double stage_profit(double q_ask, double q_buy, double e, const PeriodInputs& in, const ExecParams& p);

/// α|q| + β q²/depth. Throws InputError when |q| > 0 and depth <= 0.
double trading_cost(double q, double depth, const ExecParams& p);

struct FillParams {
  double c0 = 1.0;
  double c1 = 0.8;   ///< per €/MWh of passive offset
  double c2 = 0.5;
  double depth_ref = 20.0;  ///< d̄ used to scale contra depth

  void validate() const;
};

struct Book {
  double bid = 0.0;
  double ask = 0.0;
  double bid_depth = 0.0;
  double ask_depth = 0.0;
};

enum class OrderType { market, limit };

struct Fill {
  double filled = 0.0;  ///< signed like the order (+ sell)
  double price = 0.0;
  OrderType type = OrderType::market;
};

/// Logistic fill probability of a passive order at offset `delta` > 0.
double fill_probability(double delta, double contra_depth, const FillParams& p);

/// Largest passive offset that still fills for uniform draw `u`
/// (fills iff delta < the returned value). May be <= 0.
double max_filling_offset(double u, double contra_depth, const FillParams& p);

/// Stylized single-level fill model for a signed order `q` (+ sell).
///
/// `delta <= 0` crosses the spread: fills min(|q|, contra depth) at the contra
/// quote; impact is charged separately through `trading_cost`. `delta > 0`
/// rests at quote ± delta and fills all-or-nothing when `u < fill_probability`.
/// Unfilled volume expires at the end of the hour.
Fill limit_fill(double q, double delta, const Book& book, double u, const FillParams& p);

}  // namespace pvtrade
