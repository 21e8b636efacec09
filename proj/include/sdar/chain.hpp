#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sdar/saturation.hpp"
#include "sdar/wlan_params.hpp"

namespace sdar {

// Poisson arrival counts per channel-slot type: d(j), s(j), c(j) at means
// lambda*sigma, lambda*(T_s+sigma), lambda*(T_c+sigma). Stored to j_max with
// explicit tail masses by complement.
struct ArrivalPmfs {
  std::vector<double> d, s, c;
  double d_tail = 0.0, s_tail = 0.0, c_tail = 0.0;
  int j_max() const { return static_cast<int>(d.size()) - 1; }
  double d_at(int j) const {
    return j < 0 || j > j_max() ? 0.0 : d[static_cast<std::size_t>(j)];
  }
  double s_at(int j) const {
    return j < 0 || j > j_max() ? 0.0 : s[static_cast<std::size_t>(j)];
  }
  double c_at(int j) const {
    return j < 0 || j > j_max() ? 0.0 : c[static_cast<std::size_t>(j)];
  }
};

ArrivalPmfs arrival_pmfs(double lambda, const SlotDurations& slots, int j_max);

// Channel-slot type probabilities given n non-empty nodes, n = 0..M.
// p_coll is defined as the complement so the three sum to 1 exactly.
struct SlotTypeProbs {
  std::vector<double> idle, succ, coll;
  int m() const { return static_cast<int>(idle.size()) - 1; }
};

SlotTypeProbs slot_type_probs(const AttemptProfile& profile, int m);

// The level-transition blocks of the reduced chain, split into the part that
// is independent of the queue-emptying probabilities (a0/b0) and the part
// multiplied by them (a1/b1):
//   A_j = A_j0 + diag(0, q(1), .., q(M-1)) A_j1        (tagged queue empty)
//   B_j = B_j0 + diag(q(1), .., q(M)) B_j1             (tagged queue busy)
// a0[j]/a1[j] hold A_j for j = 0..j_max; b0[j+1]/b1[j+1] hold B_j for
// j = -1..j_max. *_sum are the exact closed-form sums over all j (the arrival
// pmf sums to 1 and the finite-difference term telescopes to 0), used for
// the tail column of the finite-buffer matrix by complement.
struct BlockSet {
  int m = 0;
  int j_max = 0;
  std::vector<Eigen::MatrixXd> a0, a1;
  std::vector<Eigen::MatrixXd> b0, b1;
  Eigen::MatrixXd a0_sum, a1_sum, b0_sum, b1_sum;

  const Eigen::MatrixXd& a0_at(int j) const { return a0[static_cast<std::size_t>(j)]; }
  const Eigen::MatrixXd& a1_at(int j) const { return a1[static_cast<std::size_t>(j)]; }
  const Eigen::MatrixXd& b0_at(int j) const { return b0[static_cast<std::size_t>(j + 1)]; }
  const Eigen::MatrixXd& b1_at(int j) const { return b1[static_cast<std::size_t>(j + 1)]; }
};

BlockSet block_matrices(int m, const ArrivalPmfs& pmfs, const SlotTypeProbs& stp,
                        int j_max);

// q(n) = P(a non-empty queue holds exactly one packet | N = n), n = 1..M.
struct QVector {
  std::vector<double> values;  // values[n-1] = q(n)
  int m() const { return static_cast<int>(values.size()); }
  double at(int n) const { return values[static_cast<std::size_t>(n - 1)]; }
  double& at(int n) { return values[static_cast<std::size_t>(n - 1)]; }
  static QVector constant(int m, double value) {
    return QVector{std::vector<double>(static_cast<std::size_t>(m), value)};
  }
};

// Row-stochastic transition matrix of the finite-buffer reduced chain,
// dimension (K+1)*M, state (j,k) <-> row j*M + k.
struct ReducedTPM {
  Eigen::MatrixXd p;
  int m = 0;
  int k_buf = 0;
  double max_row_dev = 0.0;  // max |row sum - 1| before normalization

  int index(int level, int k) const { return level * m + k; }
  int dim() const { return (k_buf + 1) * m; }
};

// Assembles the block-upper-Hessenberg finite-buffer matrix; the last block
// column holds the tail sums computed by complement. Rows are checked against
// 1 (RowSumViolation beyond 1e-9), tiny negative entries in [-1e-15, 0) are
// clamped, and each row is normalized afterwards.
ReducedTPM assemble_tpm(const BlockSet& blocks, const QVector& q, int k_buf);

}  // namespace sdar
