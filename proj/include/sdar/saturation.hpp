#pragma once

#include <vector>

#include "sdar/wlan_params.hpp"

namespace sdar {

// Which saturation fixed point supplies beta = G(gamma).
//   FiniteRetry:     G_R(g) = sum_{k=0..R} g^k / sum_{k=0..R} g^k (b_k + 1),
//                    b_k = (min(2^k (cw_min+1), cw_max+1) - 1) / 2.
//   BianchiInfinite: classic closed form with W = cw_min+1 and
//                    m = log2((cw_max+1)/W) doubling stages.
enum class AttemptModel { FiniteRetry, BianchiInfinite };

// Per-slot attempt probability of a saturated node given collision
// probability gamma in [0,1).
double attempt_probability(double gamma, const MacParams& mac,
                           AttemptModel model = AttemptModel::FiniteRetry);

struct FixedPoint {
  double beta = 0.0;
  double gamma = 0.0;
};

// Unique solution of gamma = 1 - (1 - G(gamma))^(n-1), bisection to
// |gamma residual| < tol.
FixedPoint solve_fixed_point(int n, const MacParams& mac,
                             AttemptModel model = AttemptModel::FiniteRetry,
                             double tol = 1e-12, int max_iter = 400);

// Immutable per-(n, MacParams) table; computed once per analysis, index n,
// betas[0] = gammas[0] = 0.
struct AttemptProfile {
  std::vector<double> betas;
  std::vector<double> gammas;
  int m() const { return static_cast<int>(betas.size()) - 1; }
  double beta(int n) const { return betas[static_cast<std::size_t>(n)]; }
  double gamma(int n) const { return gammas[static_cast<std::size_t>(n)]; }
};

AttemptProfile attempt_profile(int m, const MacParams& mac,
                               AttemptModel model = AttemptModel::FiniteRetry);

// Saturation throughput curve, index n (entry 0 unused/zero):
//   p_succ,n = n b_n (1-b_n)^(n-1)
//   L_sat,n  = sigma + p_coll,n T_c + p_succ,n T_s
//   Theta_sat,n = p_succ,n / L_sat,n
struct SaturationCurve {
  std::vector<double> theta_sat;   // packets/s
  std::vector<double> l_sat;       // seconds
  std::vector<double> p_succ_sat;
  int m() const { return static_cast<int>(theta_sat.size()) - 1; }
};

SaturationCurve saturation_curve(const AttemptProfile& profile,
                                 const SlotDurations& slots, int m);

// Sufficient stability condition: sum_i lambda_i < min_n Theta_sat,n with all
// lambda_i > 0.
struct StabilityReport {
  bool stable_sufficient = false;
  double margin = 0.0;       // min_n Theta_sat,n - sum lambda (packets/s)
  int argmin_n = 0;
  double min_theta_sat = 0.0;
};

StabilityReport stability_check(const Scenario& s, const SaturationCurve& curve);

}  // namespace sdar
