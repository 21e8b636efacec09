#include "sdar/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdar/errors.hpp"

namespace sdar {

namespace {

std::vector<double> poisson_pmf(double mean, int j_max) {
  std::vector<double> p(static_cast<std::size_t>(j_max) + 1, 0.0);
  p[0] = std::exp(-mean);
  for (int j = 1; j <= j_max; ++j)
    p[static_cast<std::size_t>(j)] = p[static_cast<std::size_t>(j - 1)] * mean / j;
  return p;
}

double tail_mass(const std::vector<double>& pmf) {
  double partial = 0.0;
  for (const double v : pmf) partial += v;
  return std::max(0.0, 1.0 - partial);
}

double binom(int a, int b) {
  if (b < 0 || b > a) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

// C(a,b) * base^b_expo with the convention that a zero binomial coefficient
// kills the whole term before the power is formed. This is what keeps the
// k - n = -1 entries of the q-weighted blocks from evaluating (1-s(0))^-1.
double binom_pow(int a, int b, double base, int expo) {
  if (b < 0 || b > a) return 0.0;
  return binom(a, b) * std::pow(base, expo);
}

}  // namespace

ArrivalPmfs arrival_pmfs(double lambda, const SlotDurations& slots, int j_max) {
  if (lambda < 0) throw ConfigError("arrival_pmfs: lambda must be >= 0");
  if (j_max < 0) throw ConfigError("arrival_pmfs: j_max must be >= 0");
  ArrivalPmfs p;
  p.d = poisson_pmf(lambda * slots.l_idle(), j_max);
  p.s = poisson_pmf(lambda * slots.l_succ(), j_max);
  p.c = poisson_pmf(lambda * slots.l_coll(), j_max);
  p.d_tail = tail_mass(p.d);
  p.s_tail = tail_mass(p.s);
  p.c_tail = tail_mass(p.c);
  return p;
}

SlotTypeProbs slot_type_probs(const AttemptProfile& profile, int m) {
  if (profile.m() < m)
    throw ConfigError("slot_type_probs: profile does not cover n = 1..m");
  SlotTypeProbs stp;
  stp.idle.assign(static_cast<std::size_t>(m) + 1, 0.0);
  stp.succ.assign(static_cast<std::size_t>(m) + 1, 0.0);
  stp.coll.assign(static_cast<std::size_t>(m) + 1, 0.0);
  stp.idle[0] = 1.0;
  for (int n = 1; n <= m; ++n) {
    const double b = profile.beta(n);
    const double idle = std::pow(1.0 - b, n);
    const double succ = n * b * std::pow(1.0 - b, n - 1);
    stp.idle[static_cast<std::size_t>(n)] = idle;
    stp.succ[static_cast<std::size_t>(n)] = succ;
    // complement; the clamp keeps the n = 1 case from rounding to -1e-17
    stp.coll[static_cast<std::size_t>(n)] = std::max(0.0, 1.0 - idle - succ);
  }
  return stp;
}

BlockSet block_matrices(int m, const ArrivalPmfs& pmfs, const SlotTypeProbs& stp,
                        int j_max) {
  if (stp.m() < m) throw ConfigError("block_matrices: slot-type probs cover < m");
  // B_j needs s(j+1), so the pmfs must extend one index past the blocks
  if (j_max + 1 > pmfs.j_max())
    throw ConfigError("block_matrices: pmfs truncated below requested j_max + 1");

  BlockSet bs;
  bs.m = m;
  bs.j_max = j_max;
  bs.a0.assign(static_cast<std::size_t>(j_max) + 1, Eigen::MatrixXd::Zero(m, m));
  bs.a1.assign(static_cast<std::size_t>(j_max) + 1, Eigen::MatrixXd::Zero(m, m));
  bs.b0.assign(static_cast<std::size_t>(j_max) + 2, Eigen::MatrixXd::Zero(m, m));
  bs.b1.assign(static_cast<std::size_t>(j_max) + 2, Eigen::MatrixXd::Zero(m, m));
  bs.a0_sum = Eigen::MatrixXd::Zero(m, m);
  bs.a1_sum = Eigen::MatrixXd::Zero(m, m);
  bs.b0_sum = Eigen::MatrixXd::Zero(m, m);
  bs.b1_sum = Eigen::MatrixXd::Zero(m, m);

  const double d0 = pmfs.d_at(0), s0 = pmfs.s_at(0), c0 = pmfs.c_at(0);

  for (int n = 0; n < m; ++n) {
    const double p_idle_n = stp.idle[static_cast<std::size_t>(n)];
    const double p_succ_n = stp.succ[static_cast<std::size_t>(n)];
    const double p_coll_n = stp.coll[static_cast<std::size_t>(n)];
    const double p_idle_n1 = stp.idle[static_cast<std::size_t>(n + 1)];
    const double p_succ_n1 = stp.succ[static_cast<std::size_t>(n + 1)];
    const double p_coll_n1 = stp.coll[static_cast<std::size_t>(n + 1)];

    for (int k = 0; k < m; ++k) {
      const int up = k - n;  // newly non-empty non-tagged queues
      const double pow_d0 = std::pow(d0, m - k - 1);
      const double pow_c0 = std::pow(c0, m - k - 1);
      const double pow_s0 = std::pow(s0, m - k - 1);
      // weight of "arrivals hit exactly k-n of the M-n-1 empty non-tagged
      // queues" per slot type
      const double w_d = binom_pow(m - n - 1, up, 1.0 - d0, up) * pow_d0;
      const double w_c = binom_pow(m - n - 1, up, 1.0 - c0, up) * pow_c0;
      const double w_s = binom_pow(m - n - 1, up, 1.0 - s0, up) * pow_s0;
      // bracket of the q-weighted part, the two binomial products evaluated
      // separately so a zero coefficient suppresses its power term
      const double bracket =
          (binom_pow(m - n, up + 1, 1.0 - s0, up + 1) -
           binom_pow(m - n - 1, up, 1.0 - s0, up)) * pow_s0;

      for (int j = 0; j <= j_max; ++j) {
        bs.a0[static_cast<std::size_t>(j)](n, k) =
            p_idle_n * pmfs.d_at(j) * w_d + p_coll_n * pmfs.c_at(j) * w_c +
            p_succ_n * pmfs.s_at(j) * w_s;
        bs.a1[static_cast<std::size_t>(j)](n, k) = p_succ_n * pmfs.s_at(j) * bracket;
      }
      for (int j = -1; j <= j_max; ++j) {
        // the success term p_succ s(j) w_s + (p_succ/(n+1)) w_s (s(j+1)-s(j))
        // regrouped as p_succ w_s (n s(j) + s(j+1))/(n+1): algebraically the
        // same, but never cancels to a negative in the pmf tail
        bs.b0[static_cast<std::size_t>(j + 1)](n, k) =
            p_idle_n1 * pmfs.d_at(j) * w_d + p_coll_n1 * pmfs.c_at(j) * w_c +
            p_succ_n1 * w_s * (n * pmfs.s_at(j) + pmfs.s_at(j + 1)) / (n + 1);
        bs.b1[static_cast<std::size_t>(j + 1)](n, k) =
            (static_cast<double>(n) / (n + 1)) * p_succ_n1 * pmfs.s_at(j) * bracket;
      }
      // closed-form sums over all j: pmfs sum to 1, (s(j+1)-s(j)) telescopes
      bs.a0_sum(n, k) = p_idle_n * w_d + p_coll_n * w_c + p_succ_n * w_s;
      bs.a1_sum(n, k) = p_succ_n * bracket;
      bs.b0_sum(n, k) = p_idle_n1 * w_d + p_coll_n1 * w_c + p_succ_n1 * w_s;
      bs.b1_sum(n, k) = (static_cast<double>(n) / (n + 1)) * p_succ_n1 * bracket;
    }
  }
  return bs;
}

namespace {

// A_j with the diagonal q-weights folded in; row n of a1 carries q(n), row 0
// carries none.
Eigen::MatrixXd fold_a(const BlockSet& bs, const Eigen::MatrixXd& a0,
                       const Eigen::MatrixXd& a1, const QVector& q) {
  Eigen::MatrixXd out = a0;
  for (int n = 1; n < bs.m; ++n) out.row(n) += q.at(n) * a1.row(n);
  return out;
}

// B_j likewise; row n carries q(n+1) (tagged busy, so N = n+1).
Eigen::MatrixXd fold_b(const BlockSet& bs, const Eigen::MatrixXd& b0,
                       const Eigen::MatrixXd& b1, const QVector& q) {
  Eigen::MatrixXd out = b0;
  for (int n = 0; n < bs.m; ++n) out.row(n) += q.at(n + 1) * b1.row(n);
  return out;
}

}  // namespace

ReducedTPM assemble_tpm(const BlockSet& blocks, const QVector& q, int k_buf) {
  const int m = blocks.m;
  if (k_buf < 1) throw ConfigError("assemble_tpm: buffer must hold >= 1 packet");
  if (q.m() != m) throw ConfigError("assemble_tpm: q covers n = 1..M");
  for (int n = 1; n <= m; ++n)
    if (!(q.at(n) > 0.0) || q.at(n) > 1.0)
      throw ConfigError("assemble_tpm: q must be strictly positive and <= 1");
  if (blocks.j_max < k_buf - 1)
    throw ConfigError("assemble_tpm: blocks cover j < K-1");

  ReducedTPM tpm;
  tpm.m = m;
  tpm.k_buf = k_buf;
  tpm.p = Eigen::MatrixXd::Zero((k_buf + 1) * m, (k_buf + 1) * m);

  const auto put = [&](int bi, int bj, const Eigen::MatrixXd& x) {
    tpm.p.block(bi * m, bj * m, m, m) = x;
  };

  // level 0: A_0 .. A_{K-1}, then sum_{j>=K} A_j by complement
  {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
    for (int c = 0; c < k_buf; ++c) {
      const Eigen::MatrixXd a = fold_a(blocks, blocks.a0_at(c), blocks.a1_at(c), q);
      put(0, c, a);
      acc += a;
    }
    const Eigen::MatrixXd total = fold_a(blocks, blocks.a0_sum, blocks.a1_sum, q);
    put(0, k_buf, total - acc);
  }

  // level i >= 1: B_{-1} at column i-1, B_j at column i+j, tail by complement
  const Eigen::MatrixXd b_down =
      fold_b(blocks, blocks.b0_at(-1), blocks.b1_at(-1), q);
  const Eigen::MatrixXd b_total = fold_b(blocks, blocks.b0_sum, blocks.b1_sum, q);
  for (int i = 1; i <= k_buf; ++i) {
    Eigen::MatrixXd acc = b_down;
    put(i, i - 1, b_down);
    for (int c = i; c < k_buf; ++c) {
      const Eigen::MatrixXd b = fold_b(blocks, blocks.b0_at(c - i), blocks.b1_at(c - i), q);
      put(i, c, b);
      acc += b;
    }
    put(i, k_buf, b_total - acc);
  }

  // conservation check, clamp of rounding negatives, then row normalization
  double max_dev = 0.0;
  for (int r = 0; r < tpm.dim(); ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < tpm.dim(); ++c) {
      double v = tpm.p(r, c);
      if (v < 0.0) {
        if (v < -1e-15)
          throw RowSumViolation("assemble_tpm: negative entry " + std::to_string(v) +
                                " at row " + std::to_string(r));
        v = 0.0;
        tpm.p(r, c) = 0.0;
      }
      row_sum += v;
    }
    const double dev = std::abs(row_sum - 1.0);
    max_dev = std::max(max_dev, dev);
    if (dev > 1e-9)
      throw RowSumViolation("assemble_tpm: row " + std::to_string(r) +
                            " sums to 1 " + (row_sum > 1 ? "+ " : "- ") +
                            std::to_string(dev));
    tpm.p.row(r) /= row_sum;
  }
  tpm.max_row_dev = max_dev;
  return tpm;
}

}  // namespace sdar
