#include "pvtrade/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace {

void check_dim(std::span<const double> x) {
  if (x.size() != kFeatureDim) {
    throw ShapeError(fmt::format("feature vector has {} entries, expected {}", x.size(), kFeatureDim));
  }
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

PolicyParams PolicyParams::zeros(int action_dim, double sigma_init) {
  if (action_dim < 1 || action_dim > kMaxActionDim) {
    throw ShapeError(fmt::format("action_dim {} not in [1, {}]", action_dim, kMaxActionDim));
  }
  if (!(sigma_init > 0.0) || !std::isfinite(sigma_init)) {
    throw DomainError(fmt::format("sigma_init {} must be positive", sigma_init));
  }
  PolicyParams p;
  p.action_dim = action_dim;
  p.W.assign(static_cast<std::size_t>(action_dim) * kFeatureDim, 0.0);
  p.log_sigma.assign(static_cast<std::size_t>(action_dim), std::log(sigma_init));
  p.v.assign(kFeatureDim, 0.0);
  return p;
}

double PolicyParams::sigma(int a) const { return std::exp(log_sigma[static_cast<std::size_t>(a)]); }

void PolicyParams::validate() const {
  if (action_dim < 1 || action_dim > kMaxActionDim) {
    throw ShapeError(fmt::format("action_dim {} not in [1, {}]", action_dim, kMaxActionDim));
  }
  const auto ad = static_cast<std::size_t>(action_dim);
  if (W.size() != ad * kFeatureDim || log_sigma.size() != ad || v.size() != kFeatureDim) {
    throw ShapeError(fmt::format("policy sizes W={} log_sigma={} v={} do not match action_dim {}", W.size(),
                                 log_sigma.size(), v.size(), action_dim));
  }
  auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(W) || !finite(log_sigma) || !finite(v)) throw DomainError("policy parameters not finite");
}

ActionBox action_box(const EnvConfig& env) { return {env.q_lo, env.q_hi, env.delta_lo, env.delta_hi}; }

ActionVector mean_raw(const PolicyParams& p, std::span<const double> x) {
  check_dim(x);
  ActionVector mu{};
  for (int a = 0; a < p.action_dim; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) s += p.weight(a, i) * x[i];
    mu[static_cast<std::size_t>(a)] = s;
  }
  return mu;
}

MdpAction clip_action(const ActionVector& a, int action_dim, const ActionBox& box) {
  MdpAction out;
  out.q = std::clamp(a[0], box.q_lo, box.q_hi);
  out.delta = action_dim > 1 ? std::clamp(a[1], box.delta_lo, box.delta_hi) : 0.0;
  return out;
}

MdpAction mean_action(const PolicyParams& p, std::span<const double> x, const ActionBox& box) {
  return clip_action(mean_raw(p, x), p.action_dim, box);
}

PolicySample sample_action(const PolicyParams& p, std::span<const double> x, std::span<const double> normals,
                           const ActionBox& box) {
  if (normals.size() < static_cast<std::size_t>(p.action_dim)) {
    throw ShapeError("sample_action: one normal draw per action dimension required");
  }
  PolicySample s;
  s.pre_clip = mean_raw(p, x);
  for (int a = 0; a < p.action_dim; ++a) {
    s.pre_clip[static_cast<std::size_t>(a)] += p.sigma(a) * normals[static_cast<std::size_t>(a)];
  }
  s.action = clip_action(s.pre_clip, p.action_dim, box);
  return s;
}

double log_prob(const PolicyParams& p, std::span<const double> x, const ActionVector& a) {
  const auto mu = mean_raw(p, x);
  double lp = 0.0;
  for (int k = 0; k < p.action_dim; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double z = (a[ks] - mu[ks]) / p.sigma(k);
    lp += -p.log_sigma[ks] - kHalfLog2Pi - 0.5 * z * z;
  }
  return lp;
}

void add_log_prob_grad(const PolicyParams& p, std::span<const double> x, const ActionVector& a, double scale,
                       std::span<double> gW, std::span<double> gls) {
  const auto mu = mean_raw(p, x);
  for (int k = 0; k < p.action_dim; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double var = std::exp(2.0 * p.log_sigma[ks]);
    const double r = a[ks] - mu[ks];
    const double c = scale * r / var;
    double* row = gW.data() + ks * kFeatureDim;
    for (std::size_t i = 0; i < kFeatureDim; ++i) row[i] += c * x[i];
    gls[ks] += scale * (r * r / var - 1.0);
  }
}

double entropy(const PolicyParams& p) {
  double h = 0.0;
  for (double ls : p.log_sigma) h += ls + kHalfLog2Pi + 0.5;
  return h;
}

double value(const PolicyParams& p, std::span<const double> x) {
  check_dim(x);
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) s += p.v[i] * x[i];
  return s;
}

std::string action_name(int a) { return a == 0 ? "q" : "delta"; }

std::vector<WeightRow> ranked_weights(const PolicyParams& p) {
  const auto& reg = feature_registry();
  std::vector<WeightRow> rows;
  for (int a = 0; a < p.action_dim; ++a) {
    const auto first = rows.size();
    for (std::size_t i = 0; i < kFeatureDim; ++i) rows.push_back({a, std::string(reg[i].name), p.weight(a, i)});
    std::stable_sort(rows.begin() + static_cast<std::ptrdiff_t>(first), rows.end(),
                     [](const WeightRow& l, const WeightRow& r) { return std::abs(l.weight) > std::abs(r.weight); });
  }
  return rows;
}

}  // namespace pvtrade
