#include <cmath>
#include <random>

#include "doctest.h"
#include "sdar/chain.hpp"
#include "sdar/errors.hpp"

using namespace sdar;

namespace {

SlotDurations slots_80211b() {
  return compute_slot_durations(phy_80211b(), 8224, 224, AccessMode::Basic);
}

AttemptProfile profile_for(int m) { return attempt_profile(m, MacParams{}); }

double per_node_saturation(int m) {
  const AttemptProfile p = profile_for(m);
  const SaturationCurve c = saturation_curve(p, slots_80211b(), m);
  return c.theta_sat[static_cast<std::size_t>(m)] / m;
}

}  // namespace

TEST_CASE("arrival pmfs") {
  const SlotDurations slots = slots_80211b();

  SUBCASE("lambda = 0 concentrates at zero arrivals") {
    const ArrivalPmfs p = arrival_pmfs(0.0, slots, 8);
    CHECK(p.d[0] == 1.0);
    CHECK(p.s[0] == 1.0);
    CHECK(p.c[0] == 1.0);
    for (int j = 1; j <= 8; ++j) {
      CHECK(p.d_at(j) == 0.0);
      CHECK(p.s_at(j) == 0.0);
    }
    CHECK(p.d_tail == 0.0);
  }
  SUBCASE("d(0) is exp(-lambda sigma)") {
    const ArrivalPmfs p = arrival_pmfs(320.0, slots, 16);
    CHECK(p.d[0] == doctest::Approx(std::exp(-320.0 * slots.sigma())).epsilon(1e-14));
  }
  SUBCASE("hand-evaluated Poisson value at lambda = 100/s, sigma = 20us") {
    // d(1) = e^{-0.002} * 0.002, evaluated by hand
    const ArrivalPmfs p = arrival_pmfs(100.0, slots, 16);
    CHECK(p.d_at(1) == doctest::Approx(std::exp(-0.002) * 0.002).epsilon(1e-13));
  }
  SUBCASE("mass balance: sum + tail = 1 to 1e-14") {
    for (const double lambda : {1.0, 65.0, 400.0, 2000.0}) {
      const ArrivalPmfs p = arrival_pmfs(lambda, slots, 24);
      double ds = 0, ss = 0, cs = 0;
      for (int j = 0; j <= p.j_max(); ++j) {
        ds += p.d_at(j);
        ss += p.s_at(j);
        cs += p.c_at(j);
      }
      CHECK(std::abs(ds + p.d_tail - 1.0) < 1e-14);
      CHECK(std::abs(ss + p.s_tail - 1.0) < 1e-14);
      CHECK(std::abs(cs + p.c_tail - 1.0) < 1e-14);
    }
  }
  SUBCASE("negative index convention") {
    const ArrivalPmfs p = arrival_pmfs(100.0, slots, 4);
    CHECK(p.d_at(-1) == 0.0);
    CHECK(p.s_at(-3) == 0.0);
  }
}

TEST_CASE("slot type probabilities") {
  SUBCASE("empty system idles") {
    const SlotTypeProbs stp = slot_type_probs(profile_for(2), 2);
    CHECK(stp.idle[0] == 1.0);
    CHECK(stp.succ[0] == 0.0);
    CHECK(stp.coll[0] == 0.0);
  }
  SUBCASE("single contender cannot collide") {
    const AttemptProfile p = profile_for(1);
    const SlotTypeProbs stp = slot_type_probs(p, 1);
    CHECK(stp.succ[1] == doctest::Approx(p.beta(1)).epsilon(1e-14));
    CHECK(stp.coll[1] == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("binomial hand computation at n = 2, beta = 0.1") {
    AttemptProfile p;
    p.betas = {0.0, 0.1, 0.1};
    p.gammas = {0.0, 0.0, 0.1};
    const SlotTypeProbs stp = slot_type_probs(p, 2);
    CHECK(stp.idle[2] == doctest::Approx(0.81).epsilon(1e-14));
    CHECK(stp.succ[2] == doctest::Approx(0.18).epsilon(1e-14));
    CHECK(stp.coll[2] == doctest::Approx(0.01).epsilon(1e-14));
  }
  SUBCASE("complement within 1e-14 of the direct binomial expression") {
    const int m = 10;
    const AttemptProfile p = profile_for(m);
    const SlotTypeProbs stp = slot_type_probs(p, m);
    for (int n = 1; n <= m; ++n) {
      const double b = p.beta(n);
      const double direct = 1.0 - std::pow(1.0 - b, n) - n * b * std::pow(1.0 - b, n - 1);
      CHECK(std::abs(stp.coll[static_cast<std::size_t>(n)] - direct) < 1e-14);
      // complement up to the clamp of -1ulp roundoff at n = 1
      CHECK(std::abs(stp.idle[static_cast<std::size_t>(n)] +
                     stp.succ[static_cast<std::size_t>(n)] +
                     stp.coll[static_cast<std::size_t>(n)] - 1.0) <= 2.3e-16);
    }
  }
}

TEST_CASE("block matrices in the lambda = 0 limit") {
  const int m = 4;
  const SlotDurations slots = slots_80211b();
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(0.0, slots, 9);
  const BlockSet bs = block_matrices(m, pmfs, stp, 8);

  SUBCASE("only a tagged departure moves the level down") {
    // B_{-1}(n,n) = p_succ,n+1 / (n+1), q-independent at lambda = 0
    for (int n = 0; n < m; ++n) {
      CHECK(bs.b0_at(-1)(n, n) ==
            doctest::Approx(stp.succ[static_cast<std::size_t>(n + 1)] / (n + 1)).epsilon(1e-14));
      CHECK(bs.b1_at(-1)(n, n) == 0.0);
    }
  }
  SUBCASE("non-tagged departure that empties its queue: B_0^(1)(n, n-1)") {
    // hand cancellation of the two binomial products at s(0) = 1
    for (int n = 1; n < m; ++n)
      CHECK(bs.b1_at(0)(n, n - 1) ==
            doctest::Approx((static_cast<double>(n) / (n + 1)) *
                            stp.succ[static_cast<std::size_t>(n + 1)])
                .epsilon(1e-14));
  }
  SUBCASE("no negative entries anywhere despite the k - n = -1 hazard") {
    for (int j = -1; j <= 8; ++j)
      for (int n = 0; n < m; ++n)
        for (int k = 0; k < m; ++k) {
          if (j >= 0) {
            CHECK(bs.a0_at(j)(n, k) >= 0.0);
            CHECK(bs.a0_at(j)(n, k) + bs.a1_at(j)(n, k) >= -1e-15);
          }
          CHECK(bs.b0_at(j)(n, k) >= 0.0);
          CHECK(bs.b0_at(j)(n, k) + bs.b1_at(j)(n, k) >= -1e-15);
        }
  }
}

TEST_CASE("non-tagged occupancy cannot drop without departures") {
  const int m = 5;
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(200.0, slots_80211b(), 9);
  const BlockSet bs = block_matrices(m, pmfs, stp, 8);
  for (int j = 0; j <= 8; ++j)
    for (int n = 0; n < m; ++n)
      for (int k = 0; k < n; ++k) CHECK(bs.a0_at(j)(n, k) == 0.0);
}

TEST_CASE("sign property at the q extremes") {
  const int m = 6;
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  for (const double lambda : {5.0, 65.0, 300.0}) {
    const ArrivalPmfs pmfs = arrival_pmfs(lambda, slots_80211b(), 13);
    const BlockSet bs = block_matrices(m, pmfs, stp, 12);
    for (int j = -1; j <= 12; ++j)
      for (int n = 0; n < m; ++n)
        for (int k = 0; k < m; ++k) {
          if (j >= 0) {
            CHECK(bs.a0_at(j)(n, k) >= 0.0);                        // q = 0
            CHECK(bs.a0_at(j)(n, k) + bs.a1_at(j)(n, k) >= -1e-15); // q = 1
          }
          CHECK(bs.b0_at(j)(n, k) >= 0.0);
          CHECK(bs.b0_at(j)(n, k) + bs.b1_at(j)(n, k) >= -1e-15);
        }
  }
}

TEST_CASE("monotone tails by complement") {
  const int m = 4, j_max = 16;
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(500.0, slots_80211b(), j_max + 1);
  const BlockSet bs = block_matrices(m, pmfs, stp, j_max);
  const QVector q = QVector::constant(m, 0.7);

  const auto fold_a = [&](const Eigen::MatrixXd& m0, const Eigen::MatrixXd& m1) {
    Eigen::MatrixXd out = m0;
    for (int n = 1; n < m; ++n) out.row(n) += q.at(n) * m1.row(n);
    return out;
  };
  // tail(J) = full sum - partial sums; entry sums must decrease in J and the
  // complement must match the explicitly accumulated remainder
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(m, m);
  double prev_tail_sum = 1e300;
  for (int J = 0; J <= j_max; ++J) {
    const Eigen::MatrixXd tail = fold_a(bs.a0_sum, bs.a1_sum) - partial;
    const double tail_sum = tail.sum();
    CHECK(tail_sum <= prev_tail_sum + 1e-12);
    prev_tail_sum = tail_sum;
    Eigen::MatrixXd rest = Eigen::MatrixXd::Zero(m, m);
    for (int j = J; j <= j_max; ++j) rest += fold_a(bs.a0_at(j), bs.a1_at(j));
    // difference is the mass beyond the truncation point
    CHECK((tail - rest).cwiseAbs().maxCoeff() <
          pmfs.d_tail + pmfs.s_tail + pmfs.c_tail + 1e-12);
    partial += fold_a(bs.a0_at(J), bs.a1_at(J));
  }
}

TEST_CASE("row stochasticity holds for randomized (M, K, lambda, q)") {
  // hand-rolled property sweep with a fixed seed
  std::mt19937_64 gen(12345);
  const auto unit = [&] { return (gen() >> 11) * 0x1.0p-53; };
  for (int draw = 0; draw < 40; ++draw) {
    const int m = 1 + static_cast<int>(gen() % 12);
    const int k_buf = 1 + static_cast<int>(gen() % 8);
    const AttemptProfile profile = profile_for(m);
    const SlotTypeProbs stp = slot_type_probs(profile, m);
    const double sat = per_node_saturation(m);
    const double lambda = 3.0 * sat * unit();
    const ArrivalPmfs pmfs = arrival_pmfs(lambda, slots_80211b(), k_buf + 64);
    const BlockSet bs = block_matrices(m, pmfs, stp, k_buf - 1);
    QVector q = QVector::constant(m, 0.5);
    for (int n = 1; n <= m; ++n) q.at(n) = 1e-6 + (1.0 - 1e-6) * unit();
    const ReducedTPM tpm = assemble_tpm(bs, q, k_buf);
    CHECK(tpm.max_row_dev < 1e-12);
  }
}

TEST_CASE("assembled matrix is row stochastic across the load range") {
  for (const int m : {2, 3, 10}) {
    const AttemptProfile profile = profile_for(m);
    const SlotTypeProbs stp = slot_type_probs(profile, m);
    const double sat = per_node_saturation(m);
    for (const int k_buf : {2, 5}) {
      for (const double factor : {0.1, 0.5, 1.0, 2.0}) {
        const ArrivalPmfs pmfs = arrival_pmfs(factor * sat, slots_80211b(), k_buf + 64);
        const BlockSet bs = block_matrices(m, pmfs, stp, k_buf - 1);
        const ReducedTPM tpm = assemble_tpm(bs, QVector::constant(m, 0.5), k_buf);
        CHECK(tpm.max_row_dev < 1e-12);
      }
    }
  }
}

TEST_CASE("K = 1 structure: [[A0, sum A_j>=1], [B_-1, sum B_j>=0]]") {
  const int m = 3;
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(100.0, slots_80211b(), 9);
  const BlockSet bs = block_matrices(m, pmfs, stp, 8);
  const QVector q = QVector::constant(m, 0.4);
  const ReducedTPM tpm = assemble_tpm(bs, q, 1);
  REQUIRE(tpm.dim() == 2 * m);

  const auto fold_a = [&](const Eigen::MatrixXd& m0, const Eigen::MatrixXd& m1) {
    Eigen::MatrixXd out = m0;
    for (int n = 1; n < m; ++n) out.row(n) += q.at(n) * m1.row(n);
    return out;
  };
  const auto fold_b = [&](const Eigen::MatrixXd& m0, const Eigen::MatrixXd& m1) {
    Eigen::MatrixXd out = m0;
    for (int n = 0; n < m; ++n) out.row(n) += q.at(n + 1) * m1.row(n);
    return out;
  };
  // row normalization rescales by at most ~1e-13 here
  CHECK((tpm.p.block(0, 0, m, m) - fold_a(bs.a0_at(0), bs.a1_at(0))).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd tail_a = fold_a(bs.a0_sum, bs.a1_sum) - fold_a(bs.a0_at(0), bs.a1_at(0));
  CHECK((tpm.p.block(0, m, m, m) - tail_a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((tpm.p.block(m, 0, m, m) - fold_b(bs.b0_at(-1), bs.b1_at(-1))).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd tail_b = fold_b(bs.b0_sum, bs.b1_sum) - fold_b(bs.b0_at(-1), bs.b1_at(-1));
  CHECK((tpm.p.block(m, m, m, m) - tail_b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("with q = 1 and no arrivals, (1,0) steps down to (0,0) at rate p_succ,1") {
  const int m = 3;
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(0.0, slots_80211b(), 9);
  const BlockSet bs = block_matrices(m, pmfs, stp, 8);
  const ReducedTPM tpm = assemble_tpm(bs, QVector::constant(m, 1.0), 2);
  CHECK(tpm.p(tpm.index(1, 0), tpm.index(0, 0)) ==
        doctest::Approx(stp.succ[1]).epsilon(1e-12));
}

TEST_CASE("assemble rejects invalid q") {
  const int m = 2;
  const AttemptProfile profile = profile_for(m);
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(10.0, slots_80211b(), 9);
  const BlockSet bs = block_matrices(m, pmfs, stp, 8);
  CHECK_THROWS_AS(assemble_tpm(bs, QVector::constant(m, 0.0), 2), ConfigError);
  CHECK_THROWS_AS(assemble_tpm(bs, QVector::constant(m, 1.5), 2), ConfigError);
}
