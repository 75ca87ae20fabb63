#pragma once

#include <string>

#include "pvtrade/mdp_env.hpp"

namespace pvtrade {

enum class BaselineVariant { spot_only, forecast_tracking, sign_spread, oracle };

std::string to_string(BaselineVariant v);
BaselineVariant baseline_from_string(const std::string& s);

struct BaselineKind {
  BaselineVariant variant = BaselineVariant::spot_only;
  double threshold = 4.0;  ///< €/MWh, sign_spread only
};

/// Decision of a comparison strategy for the current round.
///
/// Baselines submit volumes directly (the environment must not route them
/// through the executor). Only the oracle reads `foresight`; the others see
/// the causal state and the round's caps. Throws InputError when the oracle
/// is called without foresight.
MdpAction baseline_action(const BaselineKind& kind, const MdpState& state, const TradeCaps& caps,
                          const Foresight* foresight, const EnvConfig& env);

/// Oracle decision spelled out: best attainable price per side given the
/// known fill draw, then the volume maximizing realized hour profit
/// q·(p − p_im) − c(q) within the caps. Ties resolve to no trade.
MdpAction oracle_action(const MdpState& state, const TradeCaps& caps, const Foresight& foresight,
                        const EnvConfig& env);

}  // namespace pvtrade
