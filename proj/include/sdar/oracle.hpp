#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sdar/chain.hpp"
#include "sdar/saturation.hpp"
#include "sdar/wlan_params.hpp"

namespace sdar {

// Brute-force joint queue-length chain on {0..K}^M, for validating the
// tagged-node reduction at desk scale.
struct JointChain {
  int m = 0;
  int k_buf = 0;
  long n_states = 0;
  Eigen::MatrixXd tpm;

  long index_of(const std::vector<int>& state) const;
  std::vector<int> state_of(long index) const;
};

// Per state with n non-empty queues: slot type per the binomial attempt law,
// the departing queue uniform among the non-empty on a success, independent
// per-queue Poisson arrivals clipped at the buffer (q' = min(K, q - dep + a),
// the excess blocked within the slot).
JointChain build_joint_chain(int m, int k_buf, double lambda,
                             const AttemptProfile& profile, const SlotDurations& slots);

struct OracleResult {
  Eigen::VectorXd stationary;
  std::vector<double> p_n;       // exact N-marginal, n = 0..M
  double gamma = 0.0;
  double theta_agg = 0.0;
  std::vector<double> q_exact;   // q_exact[n-1] = P(Q=1 | N=n, Q>0), n = 1..M
  std::vector<double> p_dep;     // exact departure-left-behind, j = 0..K
  double w_bar = 0.0;
  double block_prob = 0.0;
};

OracleResult joint_stationary(const JointChain& chain, double lambda,
                              const AttemptProfile& profile, const SlotDurations& slots);

struct DiscrepancyReport {
  int m = 0;
  int k_buf = 0;
  double lambda = 0.0;
  double tv_n_marginal = 0.0;
  double gamma_oracle = 0.0, gamma_reduced = 0.0, gamma_rel_err = 0.0;
  double theta_oracle = 0.0, theta_reduced = 0.0, theta_rel_err = 0.0;
  double wbar_oracle = 0.0, wbar_reduced = 0.0, wbar_rel_err = 0.0;
  std::vector<double> q_gap;     // |q_exact(n) - q_tilde(n)|, n = 1..M
};

// Runs the reduced-chain pipeline and the exact joint chain on the same
// scenario and reports the gaps. Requires equal rates and finite K.
DiscrepancyReport compare_reduced_vs_oracle(const Scenario& s,
                                            AttemptModel model = AttemptModel::FiniteRetry);

std::string discrepancy_json(const DiscrepancyReport& r);

}  // namespace sdar
