#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pvtrade/features.hpp"
#include "pvtrade/mdp_env.hpp"

namespace pvtrade {

inline constexpr int kMaxActionDim = 2;
using ActionVector = std::array<double, kMaxActionDim>;

/// Linear-Gaussian actor and linear critic over the feature vector.
///
/// `W` is row-major, one row of kFeatureDim weights per action dimension:
/// row 0 is the volume q, row 1 (when present) the limit offset delta.
struct PolicyParams {
  int action_dim = 2;
  std::vector<double> W;
  std::vector<double> log_sigma;
  std::vector<double> v;

  /// Zero weights, sigma = `sigma_init` on every action dimension.
  static PolicyParams zeros(int action_dim, double sigma_init = 0.5);

  double weight(int a, std::size_t i) const { return W[static_cast<std::size_t>(a) * kFeatureDim + i]; }
  double& weight(int a, std::size_t i) { return W[static_cast<std::size_t>(a) * kFeatureDim + i]; }
  double sigma(int a) const;

  /// Throws ShapeError on inconsistent sizes, DomainError on non-finite values.
  void validate() const;

  bool operator==(const PolicyParams&) const = default;
};

struct ActionBox {
  double q_lo = -5.0;
  double q_hi = 5.0;
  double delta_lo = -2.0;
  double delta_hi = 4.0;
};

ActionBox action_box(const EnvConfig& env);

/// W·x before clipping; unused dimensions are 0.
ActionVector mean_raw(const PolicyParams& p, std::span<const double> x);

/// Deterministic deployment action W·x, clipped to the box. A one-dimensional
/// policy always crosses the spread (delta = 0).
MdpAction mean_action(const PolicyParams& p, std::span<const double> x, const ActionBox& box);

MdpAction clip_action(const ActionVector& a, int action_dim, const ActionBox& box);

struct PolicySample {
  ActionVector pre_clip{};
  MdpAction action;
};

/// mean + sigma·normals, then clipped. `normals` supplies one draw per
/// action dimension.
PolicySample sample_action(const PolicyParams& p, std::span<const double> x, std::span<const double> normals,
                           const ActionBox& box);

/// Diagonal-Gaussian log-density of the pre-clip action `a`.
double log_prob(const PolicyParams& p, std::span<const double> x, const ActionVector& a);

/// Accumulates scale·∇ log_prob into `gW` (size of W) and `gls` (size of log_sigma).
void add_log_prob_grad(const PolicyParams& p, std::span<const double> x, const ActionVector& a, double scale,
                       std::span<double> gW, std::span<double> gls);

/// Differential entropy of the action distribution (state independent).
double entropy(const PolicyParams& p);

double value(const PolicyParams& p, std::span<const double> x);

/// One row of the exported weight table.
struct WeightRow {
  int action = 0;
  std::string feature;
  double weight = 0.0;
};

/// Weights of every action dimension, sorted by |weight| descending within
/// each dimension.
std::vector<WeightRow> ranked_weights(const PolicyParams& p);

std::string action_name(int a);

}  // namespace pvtrade
