#include "sdar/saturation.hpp"

#include <cmath>
#include <limits>

#include "sdar/errors.hpp"

namespace sdar {

namespace {

int doubling_stages(const MacParams& mac) {
  // number of window doublings until cw_max
  int stages = 0;
  long w = mac.cw_min + 1;
  while (w < mac.cw_max + 1) {
    w *= mac.backoff_multiplier;
    ++stages;
  }
  return stages;
}

double mean_window(const MacParams& mac, int stage) {
  double w = static_cast<double>(mac.cw_min + 1);
  for (int k = 0; k < stage; ++k) {
    w *= mac.backoff_multiplier;
    if (w >= mac.cw_max + 1) return (static_cast<double>(mac.cw_max + 1) - 1.0) / 2.0;
  }
  return (w - 1.0) / 2.0;
}

double attempt_bianchi(double gamma, const MacParams& mac) {
  // beta = 2(1-2g) / [(1-2g)(W+1) + gW(1-(2g)^m)] rewritten through the
  // geometric series (1-(2g)^m)/(1-2g) = sum_{i<m} (2g)^i, which is exact on
  // all of [0,1) and removes the 0/0 at g = 1/2. For a growth factor p other
  // than 2 the stage-k window is W p^k and the series runs in (pg)^i.
  const double w = static_cast<double>(mac.cw_min + 1);
  const int m = doubling_stages(mac);
  const double z = mac.backoff_multiplier * gamma;
  double series = 0.0, zi = 1.0;
  for (int i = 0; i < m; ++i) {
    series += zi;
    zi *= z;
  }
  return 2.0 / ((w + 1.0) + gamma * w * series);
}

double attempt_finite_retry(double gamma, const MacParams& mac) {
  const int r = mac.retry_limit;
  double num = 0.0, den = 0.0, gk = 1.0;
  for (int k = 0; k <= r; ++k) {
    num += gk;
    den += gk * (mean_window(mac, k) + 1.0);
    gk *= gamma;
  }
  return num / den;
}

}  // namespace

double attempt_probability(double gamma, const MacParams& mac, AttemptModel model) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("attempt_probability: gamma must lie in [0,1)");
  return model == AttemptModel::BianchiInfinite ? attempt_bianchi(gamma, mac)
                                                : attempt_finite_retry(gamma, mac);
}

FixedPoint solve_fixed_point(int n, const MacParams& mac, AttemptModel model,
                             double tol, int max_iter) {
  if (n < 1) throw ConfigError("solve_fixed_point: n must be >= 1");
  if (n == 1) return FixedPoint{attempt_probability(0.0, mac, model), 0.0};

  // h(g) = g - (1 - (1 - G(g))^(n-1)) is increasing (G decreases in g),
  // h(0) <= 0, so bisection on [0, 1-eps] converges unconditionally.
  const double eps = 1e-9;
  double lo = 0.0, hi = 1.0 - eps;
  const auto h = [&](double g) {
    const double beta = attempt_probability(g, mac, model);
    return g - (1.0 - std::pow(1.0 - beta, n - 1));
  };
  if (h(hi) < 0.0)
    throw NoConvergence("solve_fixed_point: no sign change on [0,1) (pathological MacParams)");
  // slope of h exceeds 1, so drive the bracket well below tol to guarantee
  // the residual |gamma - Gamma(G(gamma))| < tol at the midpoint
  int iter = 0;
  while (hi - lo > tol / 64.0) {
    if (++iter > max_iter)
      throw NoConvergence("solve_fixed_point: iteration cap reached");
    const double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  const double gamma = 0.5 * (lo + hi);
  return FixedPoint{attempt_probability(gamma, mac, model), gamma};
}

AttemptProfile attempt_profile(int m, const MacParams& mac, AttemptModel model) {
  AttemptProfile p;
  p.betas.assign(static_cast<std::size_t>(m) + 1, 0.0);
  p.gammas.assign(static_cast<std::size_t>(m) + 1, 0.0);
  for (int n = 1; n <= m; ++n) {
    const FixedPoint fp = solve_fixed_point(n, mac, model);
    p.betas[static_cast<std::size_t>(n)] = fp.beta;
    p.gammas[static_cast<std::size_t>(n)] = fp.gamma;
  }
  return p;
}

SaturationCurve saturation_curve(const AttemptProfile& profile,
                                 const SlotDurations& slots, int m) {
  if (profile.m() < m)
    throw ConfigError("saturation_curve: profile does not cover n = 1..m");
  SaturationCurve c;
  c.theta_sat.assign(static_cast<std::size_t>(m) + 1, 0.0);
  c.l_sat.assign(static_cast<std::size_t>(m) + 1, 0.0);
  c.p_succ_sat.assign(static_cast<std::size_t>(m) + 1, 0.0);
  for (int n = 1; n <= m; ++n) {
    const double b = profile.beta(n);
    const double p_succ = n * b * std::pow(1.0 - b, n - 1);
    const double p_idle = std::pow(1.0 - b, n);
    const double p_coll = 1.0 - p_idle - p_succ;
    const double l_sat = slots.sigma() + p_coll * slots.t_c() + p_succ * slots.t_s();
    c.p_succ_sat[static_cast<std::size_t>(n)] = p_succ;
    c.l_sat[static_cast<std::size_t>(n)] = l_sat;
    c.theta_sat[static_cast<std::size_t>(n)] = p_succ / l_sat;
  }
  return c;
}

StabilityReport stability_check(const Scenario& s, const SaturationCurve& curve) {
  StabilityReport r;
  r.min_theta_sat = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= curve.m(); ++n) {
    const double th = curve.theta_sat[static_cast<std::size_t>(n)];
    if (th < r.min_theta_sat) {
      r.min_theta_sat = th;
      r.argmin_n = n;
    }
  }
  bool all_positive = true;
  for (const double l : s.lambdas) all_positive = all_positive && l > 0.0;
  const double total = s.lambda_total();
  r.margin = r.min_theta_sat - total;
  r.stable_sufficient = all_positive && total < r.min_theta_sat;
  return r;
}

}  // namespace sdar
