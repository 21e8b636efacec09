#include <cmath>
#include <vector>

#include "doctest.h"
#include "sdar/errors.hpp"
#include "sdar/oracle.hpp"
#include "sdar/perf.hpp"
#include "sdar/sim.hpp"

using namespace sdar;

namespace {

Scenario small_scenario(int m, double lambda, int k) {
  return scenario_80211b(m, lambda, Buffer::finite(k));
}

double per_node_saturation(int m) {
  const Scenario s = small_scenario(m, 1.0, 2);
  const SaturationCurve c =
      saturation_curve(attempt_profile(m, s.mac), slot_durations_for(s), m);
  return c.theta_sat[static_cast<std::size_t>(m)] / m;
}

// Second, independent route to the transition rows: enumerate raw arrival
// vectors (tail folded at the per-queue buffer) and apply the queue update
// q' = min(K, q - D + A) directly. The production path builds per-queue
// next-state distributions instead.
Eigen::MatrixXd rows_by_enumeration(int m, int k, double lambda,
                                    const AttemptProfile& profile,
                                    const SlotDurations& slots) {
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(lambda, slots, k);
  long dim = 1;
  for (int i = 0; i < m; ++i) dim *= k + 1;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim, dim);

  const auto state_of = [&](long idx) {
    std::vector<int> st(static_cast<std::size_t>(m));
    for (int i = m - 1; i >= 0; --i) {
      st[static_cast<std::size_t>(i)] = static_cast<int>(idx % (k + 1));
      idx /= k + 1;
    }
    return st;
  };
  const auto index_of = [&](const std::vector<int>& st) {
    long idx = 0;
    for (const int q : st) idx = idx * (k + 1) + q;
    return idx;
  };
  // raw pmf value with the truncation folded at a = k (anything >= k arrivals
  // is equivalent after clipping, since q - D >= 0)
  const auto pmf_at = [&](const std::vector<double>& pmf, double tail, int a) {
    return a < k ? pmf[static_cast<std::size_t>(a)]
                 : tail + pmf[static_cast<std::size_t>(k)];
  };

  std::vector<int> arrivals(static_cast<std::size_t>(m), 0);
  for (long si = 0; si < dim; ++si) {
    const std::vector<int> st = state_of(si);
    int n = 0;
    for (const int q : st) n += q > 0;

    struct Outcome {
      double prob;
      const std::vector<double>* pmf;
      double tail;
      int departer;
    };
    std::vector<Outcome> outcomes;
    if (n == 0) {
      outcomes.push_back({1.0, &pmfs.d, pmfs.d_tail, -1});
    } else {
      outcomes.push_back({stp.idle[static_cast<std::size_t>(n)], &pmfs.d, pmfs.d_tail, -1});
      outcomes.push_back({stp.coll[static_cast<std::size_t>(n)], &pmfs.c, pmfs.c_tail, -1});
      for (int l = 0; l < m; ++l)
        if (st[static_cast<std::size_t>(l)] > 0)
          outcomes.push_back({stp.succ[static_cast<std::size_t>(n)] / n, &pmfs.s, pmfs.s_tail, l});
    }
    for (const Outcome& oc : outcomes) {
      if (oc.prob == 0.0) continue;
      const auto iterate = [&](auto&& self, int i, double acc) -> void {
        if (i == m) {
          std::vector<int> nxt(static_cast<std::size_t>(m));
          for (int u = 0; u < m; ++u)
            nxt[static_cast<std::size_t>(u)] =
                std::min(k, st[static_cast<std::size_t>(u)] - (oc.departer == u) +
                                 arrivals[static_cast<std::size_t>(u)]);
          p(si, index_of(nxt)) += oc.prob * acc;
          return;
        }
        for (int a = 0; a <= k; ++a) {
          arrivals[static_cast<std::size_t>(i)] = a;
          self(self, i + 1, acc * pmf_at(*oc.pmf, oc.tail, a));
        }
      };
      iterate(iterate, 0, 1.0);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("single saturated-style state, no arrivals: leave or stay") {
  const Scenario s = small_scenario(1, 1.0, 1);
  const AttemptProfile profile = attempt_profile(1, s.mac);
  const JointChain chain = build_joint_chain(1, 1, 0.0, profile, slot_durations_for(s));
  // state (1): departs w.p. beta_1 to (0), stays otherwise
  const long from = chain.index_of({1});
  CHECK(chain.tpm(from, chain.index_of({0})) == doctest::Approx(profile.beta(1)).epsilon(1e-14));
  CHECK(chain.tpm(from, from) == doctest::Approx(1.0 - profile.beta(1)).epsilon(1e-14));
}

TEST_CASE("M=2, K=1, state (1,1), no arrivals: half the successes empty queue 1") {
  const Scenario s = small_scenario(2, 1.0, 1);
  const AttemptProfile profile = attempt_profile(2, s.mac);
  const SlotTypeProbs stp = slot_type_probs(profile, 2);
  const JointChain chain = build_joint_chain(2, 1, 0.0, profile, slot_durations_for(s));
  const long from = chain.index_of({1, 1});
  CHECK(chain.tpm(from, chain.index_of({0, 1})) ==
        doctest::Approx(stp.succ[2] / 2).epsilon(1e-14));
  CHECK(chain.tpm(from, chain.index_of({1, 0})) ==
        doctest::Approx(stp.succ[2] / 2).epsilon(1e-14));
}

TEST_CASE("joint chain rows are stochastic and match the enumeration route") {
  const Scenario s = small_scenario(2, 30.0, 2);
  const AttemptProfile profile = attempt_profile(2, s.mac);
  const SlotDurations slots = slot_durations_for(s);
  const JointChain chain = build_joint_chain(2, 2, 30.0, profile, slots);

  for (long r = 0; r < chain.n_states; ++r)
    CHECK(std::abs(chain.tpm.row(r).sum() - 1.0) < 1e-12);

  const Eigen::MatrixXd other = rows_by_enumeration(2, 2, 30.0, profile, slots);
  CHECK((chain.tpm - other).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("state space cap") {
  const Scenario s = small_scenario(2, 1.0, 2);
  const AttemptProfile profile = attempt_profile(2, s.mac);
  CHECK_THROWS_AS(build_joint_chain(30, 20, 1.0, profile, slot_durations_for(s)),
                  StateSpaceTooLarge);
}

TEST_CASE("exact stationary distribution: exchangeability and the empty limit") {
  const Scenario s = small_scenario(2, 100.0, 2);
  const AttemptProfile profile = attempt_profile(2, s.mac);
  const SlotDurations slots = slot_durations_for(s);

  SUBCASE("marginals of the two queues coincide") {
    const JointChain chain = build_joint_chain(2, 2, 100.0, profile, slots);
    const OracleResult res = joint_stationary(chain, 100.0, profile, slots);
    for (int v = 0; v <= 2; ++v) {
      double m1 = 0.0, m2 = 0.0;
      for (long si = 0; si < chain.n_states; ++si) {
        const auto st = chain.state_of(si);
        if (st[0] == v) m1 += res.stationary(si);
        if (st[1] == v) m2 += res.stationary(si);
      }
      CHECK(m1 == doctest::Approx(m2).epsilon(1e-10));
    }
    // stationarity under coordinate permutation: swapped-state probability equal
    for (long si = 0; si < chain.n_states; ++si) {
      const auto st = chain.state_of(si);
      const long swapped = chain.index_of({st[1], st[0]});
      CHECK(res.stationary(si) == doctest::Approx(res.stationary(swapped)).epsilon(1e-9));
    }
  }
  SUBCASE("vanishing load concentrates at the all-empty state") {
    const JointChain chain = build_joint_chain(2, 2, 1e-3, profile, slots);
    const OracleResult res = joint_stationary(chain, 1e-3, profile, slots);
    CHECK(res.stationary(chain.index_of({0, 0})) > 0.999);
  }
}

TEST_CASE("reduction is exact at M = 1") {
  const DiscrepancyReport r = compare_reduced_vs_oracle(small_scenario(1, 200.0, 3));
  CHECK(r.tv_n_marginal < 1e-10);
  CHECK(r.gamma_rel_err < 1e-9);
  CHECK(r.theta_rel_err < 1e-10);
}

TEST_CASE("reduction is exact at K = 1, where every busy queue holds one packet") {
  // the conditional-independence step is vacuous: q(n) = 1 identically
  const DiscrepancyReport r = compare_reduced_vs_oracle(small_scenario(3, 250.0, 1));
  CHECK(r.tv_n_marginal < 1e-12);
  CHECK(r.gamma_rel_err < 1e-12);
  for (const double g : r.q_gap) CHECK(g < 1e-12);
}

TEST_CASE("reduction error small at M=2, K=2 across loads") {
  const double sat = per_node_saturation(2);
  for (const double f : {0.25, 1.0}) {
    const DiscrepancyReport r = compare_reduced_vs_oracle(small_scenario(2, f * sat, 2));
    CHECK(r.tv_n_marginal < 0.02);
    CHECK(r.theta_rel_err < 0.03);
    // q-gap is the direct measure of the conditional-independence error
    for (const double g : r.q_gap) CHECK(g < 0.05);
  }
}

TEST_CASE("regenerative estimators on the exact chain match Monte-Carlo rates") {
  // gamma and Theta computed from the exact joint stationary distribution
  // (through the same occupancy-weighted estimators the reduced path uses)
  // against the simulator's raw collision/success counters
  const int m = 2, k = 2;
  const double lambda = 0.75 * per_node_saturation(2);
  const Scenario s = small_scenario(m, lambda, k);
  const AttemptProfile profile = attempt_profile(m, s.mac);
  const SlotDurations slots = slot_durations_for(s);
  const JointChain chain = build_joint_chain(m, k, lambda, profile, slots);
  const OracleResult exact = joint_stationary(chain, lambda, profile, slots);

  const int reps = 8;
  std::vector<double> gammas, thetas;
  for (int rep = 0; rep < reps; ++rep) {
    SimOptions opt;
    opt.seed = 9000 + static_cast<std::uint64_t>(rep);
    opt.horizon = 40.0;
    const EmpiricalReport rep_e = empirical_report(run_sdar(s, profile, opt));
    gammas.push_back(rep_e.gamma);
    thetas.push_back(rep_e.theta_agg);
  }
  const auto mean_se = [&](const std::vector<double>& v) {
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / (v.size() - 1) / v.size());
    return std::make_pair(mean, se);
  };
  const auto [g_mean, g_se] = mean_se(gammas);
  const auto [t_mean, t_se] = mean_se(thetas);
  CHECK(std::abs(g_mean - exact.gamma) <= 3.0 * g_se + 1e-4);
  CHECK(std::abs(t_mean - exact.theta_agg) <= 3.0 * t_se + 0.5);
}

TEST_CASE("SDAR simulator visits joint states with the oracle's frequencies") {
  const int m = 2, k = 2;
  const double lambda = 0.75 * per_node_saturation(2);
  const Scenario s = small_scenario(m, lambda, k);
  const AttemptProfile profile = attempt_profile(m, s.mac);
  const SlotDurations slots = slot_durations_for(s);
  const JointChain chain = build_joint_chain(m, k, lambda, profile, slots);
  const OracleResult exact = joint_stationary(chain, lambda, profile, slots);

  // mean +- 3 SE over independent replications vs the exact probabilities
  const int reps = 10;
  std::vector<std::vector<double>> freq(static_cast<std::size_t>(reps));
  for (int rep = 0; rep < reps; ++rep) {
    SimOptions opt;
    opt.seed = 1000 + static_cast<std::uint64_t>(rep);
    opt.horizon = 30.0;
    opt.track_joint_states = true;
    const SimStats stats = run_sdar(s, profile, opt);
    long total = 0;
    for (const long v : stats.joint_visits) total += v;
    REQUIRE(total > 0);
    for (const long v : stats.joint_visits)
      freq[static_cast<std::size_t>(rep)].push_back(static_cast<double>(v) / total);
  }
  for (long si = 0; si < chain.n_states; ++si) {
    double mean = 0.0;
    for (int rep = 0; rep < reps; ++rep) mean += freq[static_cast<std::size_t>(rep)][si];
    mean /= reps;
    double var = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      const double d = freq[static_cast<std::size_t>(rep)][si] - mean;
      var += d * d;
    }
    const double se = std::sqrt(var / (reps - 1) / reps);
    CHECK(std::abs(mean - exact.stationary(si)) <= 3.0 * se + 1e-4);
  }
}
