#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sdar/chain.hpp"

namespace sdar {

// Stationary distribution pi(j,k) of the reduced chain, j = 0..K (tagged
// queue length), k = 0..M-1 (non-empty non-tagged nodes).
struct StationaryDist {
  Eigen::MatrixXd pi;       // (K+1) x M
  double residual = 0.0;    // max-norm of pi*P - pi
  double at(int level, int k) const { return pi(level, k); }
  int k_buf() const { return static_cast<int>(pi.rows()) - 1; }
  int m() const { return static_cast<int>(pi.cols()); }
};

// Direct solve of pi = pi P with the normalization row; power-iteration
// fallback if the linear solve degrades. Throws SingularSystem when the chain
// is reducible (q or lambda at zero).
StationaryDist stationary_distribution(const ReducedTPM& tpm);

// q(n) = pi(1, n-1) / sum_{j=1..K} pi(j, n-1). Blocks whose stationary mass
// falls below den_floor are numerically unreachable; their q(n) keeps the
// previous value.
QVector update_q(const StationaryDist& pi, int k_buf, const QVector& previous,
                 double den_floor = 1e-7);

struct IterationReport {
  int iterations = 0;
  std::vector<QVector> q_history;
  std::vector<double> residuals;  // max |delta q| per iteration
  bool converged = false;
};

struct SolveOptions {
  double q_tol = 1e-9;
  int max_iterations = 500;
  double relaxation = 1.0;   // 1 = plain iteration; <1 damps the q update
  double den_floor = 1e-7;
  int pmf_margin = 64;       // arrival pmfs truncated at K + pmf_margin
  AttemptModel model = AttemptModel::FiniteRetry;
};

// Converged solution of the coupled (q, pi) fixed point plus everything
// needed to evaluate performance measures afterwards.
struct SdarSolution {
  StationaryDist pi;
  QVector q{};
  IterationReport report;
  AttemptProfile profile;
  SlotTypeProbs stp;
  ArrivalPmfs pmfs;
  SlotDurations slots;
  double lambda = 0.0;
  int m = 0;
  int k_buf = 0;
};

// Alternates assemble_tpm -> stationary_distribution -> update_q starting
// from q = 0.5 until max_n |delta q(n)| < q_tol. Requires equal arrival
// rates, finite K, lambda > 0. Hitting the iteration cap is reported through
// report.converged = false with the full history, not thrown.
SdarSolution solve_sdar_model(const Scenario& s, const AttemptProfile& profile,
                              const SolveOptions& options = {});

}  // namespace sdar
