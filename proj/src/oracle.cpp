#include "sdar/oracle.hpp"

#include <Eigen/LU>
#include <cmath>

#include "json.hpp"
#include "sdar/errors.hpp"
#include "sdar/perf.hpp"
#include "sdar/solver.hpp"

namespace sdar {

long JointChain::index_of(const std::vector<int>& state) const {
  long idx = 0;
  for (const int q : state) idx = idx * (k_buf + 1) + q;
  return idx;
}

std::vector<int> JointChain::state_of(long index) const {
  std::vector<int> st(static_cast<std::size_t>(m));
  for (int i = m - 1; i >= 0; --i) {
    st[static_cast<std::size_t>(i)] = static_cast<int>(index % (k_buf + 1));
    index /= (k_buf + 1);
  }
  return st;
}

namespace {

// Distribution of q' = min(K, q - dep + a) with a Poisson over the given pmf;
// a >= free space is folded into the blocking outcome q' = K.
std::vector<double> clipped_next(int q, int dep, int k_buf, const std::vector<double>& pmf) {
  std::vector<double> out(static_cast<std::size_t>(k_buf) + 1, 0.0);
  const int base = q - dep;
  double below = 0.0;
  for (int a = 0; base + a < k_buf; ++a) {
    const double v = pmf[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(base + a)] = v;
    below += v;
  }
  out[static_cast<std::size_t>(k_buf)] = 1.0 - below;
  return out;
}

}  // namespace

JointChain build_joint_chain(int m, int k_buf, double lambda,
                             const AttemptProfile& profile, const SlotDurations& slots) {
  double states = 1.0;
  for (int i = 0; i < m; ++i) states *= k_buf + 1;
  if (states > 1e6)
    throw StateSpaceTooLarge("build_joint_chain: (K+1)^M exceeds 1e6 states");
  // the joint matrix is dense (every arrival vector has positive probability
  // at lambda > 0), so storage, not the state count, is the binding limit
  if (states * states * 8.0 > 1.5e9)
    throw StateSpaceTooLarge(
        "build_joint_chain: dense joint matrix would exceed 1.5 GB");
  if (profile.m() < m)
    throw ConfigError("build_joint_chain: profile does not cover n = 1..M");

  JointChain chain;
  chain.m = m;
  chain.k_buf = k_buf;
  chain.n_states = static_cast<long>(states);

  const SlotTypeProbs stp = slot_type_probs(profile, m);
  // per-queue arrivals truncated at the buffer; tail folded into blocking
  const ArrivalPmfs pmfs = arrival_pmfs(lambda, slots, k_buf);

  chain.tpm = Eigen::MatrixXd::Zero(chain.n_states, chain.n_states);
  std::vector<int> next(static_cast<std::size_t>(m));

  for (long si = 0; si < chain.n_states; ++si) {
    const std::vector<int> st = chain.state_of(si);
    int n = 0;
    for (const int q : st) n += q > 0 ? 1 : 0;

    struct Outcome {
      double prob;
      const std::vector<double>* pmf;
      int departer;  // -1 = none
    };
    std::vector<Outcome> outcomes;
    if (n == 0) {
      outcomes.push_back({1.0, &pmfs.d, -1});
    } else {
      outcomes.push_back({stp.idle[static_cast<std::size_t>(n)], &pmfs.d, -1});
      outcomes.push_back({stp.coll[static_cast<std::size_t>(n)], &pmfs.c, -1});
      const double per_queue = stp.succ[static_cast<std::size_t>(n)] / n;
      for (int l = 0; l < m; ++l)
        if (st[static_cast<std::size_t>(l)] > 0) outcomes.push_back({per_queue, &pmfs.s, l});
    }

    for (const Outcome& oc : outcomes) {
      if (oc.prob == 0.0) continue;
      std::vector<std::vector<double>> dists(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i)
        dists[static_cast<std::size_t>(i)] =
            clipped_next(st[static_cast<std::size_t>(i)], oc.departer == i ? 1 : 0,
                         k_buf, *oc.pmf);
      // accumulate the product measure over per-queue next states
      const auto recurse = [&](auto&& self, int i, double acc) -> void {
        if (i == m) {
          chain.tpm(si, chain.index_of(next)) += oc.prob * acc;
          return;
        }
        for (int v = 0; v <= k_buf; ++v) {
          const double pv = dists[static_cast<std::size_t>(i)][static_cast<std::size_t>(v)];
          if (pv == 0.0) continue;
          next[static_cast<std::size_t>(i)] = v;
          self(self, i + 1, acc * pv);
        }
      };
      recurse(recurse, 0, 1.0);
    }
  }
  return chain;
}

OracleResult joint_stationary(const JointChain& chain, double lambda,
                              const AttemptProfile& profile, const SlotDurations& slots) {
  if (!(lambda > 0.0))
    throw ConfigError("joint_stationary: lambda must be > 0 for irreducibility");
  const long dim = chain.n_states;

  Eigen::RowVectorXd nu;
  if (dim <= 4096) {
    Eigen::MatrixXd a = chain.tpm.transpose() - Eigen::MatrixXd::Identity(dim, dim);
    a.row(dim - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    rhs(dim - 1) = 1.0;
    nu = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(rhs).transpose();
    for (long i = 0; i < dim; ++i)
      if (nu(i) < 0.0) nu(i) = 0.0;
    nu /= nu.sum();
  } else {
    nu = Eigen::RowVectorXd::Constant(dim, 1.0 / static_cast<double>(dim));
    for (int it = 0; it < 400000; ++it) {
      Eigen::RowVectorXd nxt = nu * chain.tpm;
      nxt /= nxt.sum();
      const double delta = (nxt - nu).cwiseAbs().maxCoeff();
      nu = nxt;
      if (delta < 1e-14) break;
    }
  }
  if ((nu * chain.tpm - nu).cwiseAbs().maxCoeff() > 1e-10)
    throw SingularSystem("joint_stationary: stationary solve failed");

  const int m = chain.m, k_buf = chain.k_buf;
  const SlotTypeProbs stp = slot_type_probs(profile, m);
  const ArrivalPmfs pmfs = arrival_pmfs(lambda, slots, k_buf);

  OracleResult res;
  res.stationary = nu.transpose();
  res.p_n.assign(static_cast<std::size_t>(m) + 1, 0.0);
  res.q_exact.assign(static_cast<std::size_t>(m), 0.0);
  std::vector<double> q_den(static_cast<std::size_t>(m), 0.0);
  res.p_dep.assign(static_cast<std::size_t>(k_buf) + 1, 0.0);
  double dep_rate = 0.0;

  for (long si = 0; si < dim; ++si) {
    const double w = nu(si);
    const std::vector<int> st = chain.state_of(si);
    int n = 0;
    for (const int q : st) n += q > 0 ? 1 : 0;
    res.p_n[static_cast<std::size_t>(n)] += w;
    const int q1 = st[0];
    if (q1 > 0) {
      q_den[static_cast<std::size_t>(n - 1)] += w;
      if (q1 == 1) res.q_exact[static_cast<std::size_t>(n - 1)] += w;
      // exact departure-left-behind of queue 1: departure prob p_succ,n / n,
      // left-behind = min(K, q1 - 1 + arrivals)
      const double pd = stp.succ[static_cast<std::size_t>(n)] / n;
      dep_rate += w * pd;
      const std::vector<double> nxt = clipped_next(q1, 1, k_buf, pmfs.s);
      for (int j = 0; j <= k_buf; ++j)
        res.p_dep[static_cast<std::size_t>(j)] += w * pd * nxt[static_cast<std::size_t>(j)];
    }
  }
  for (int n = 1; n <= m; ++n)
    if (q_den[static_cast<std::size_t>(n - 1)] > 0.0)
      res.q_exact[static_cast<std::size_t>(n - 1)] /= q_den[static_cast<std::size_t>(n - 1)];
  if (dep_rate > 0.0)
    for (double& v : res.p_dep) v /= dep_rate;

  res.gamma = collision_probability(res.p_n, profile);
  res.theta_agg = throughput(res.p_n, profile, slots).first;

  // mean delay through the same level-crossing analysis, with the exact
  // departure distribution (bins >= K-1 folded together)
  const double theta_node = res.theta_agg / m;
  std::vector<double> p_dep_folded(static_cast<std::size_t>(k_buf), 0.0);
  for (int j = 0; j <= k_buf; ++j)
    p_dep_folded[static_cast<std::size_t>(std::min(j, k_buf - 1))] +=
        res.p_dep[static_cast<std::size_t>(j)];
  const DelayResult d = delay(p_dep_folded, theta_node, lambda, k_buf);
  res.w_bar = d.w_bar;
  res.block_prob = d.block_prob;
  return res;
}

DiscrepancyReport compare_reduced_vs_oracle(const Scenario& s, AttemptModel model) {
  validate_scenario(s);
  if (!s.equal_rates())
    throw ConfigError("compare_reduced_vs_oracle: requires equal lambda_i");
  if (!s.buffer.is_finite)
    throw ConfigError("compare_reduced_vs_oracle: requires finite K");

  const AttemptProfile profile = attempt_profile(s.m, s.mac, model);
  const SlotDurations slots = slot_durations_for(s);
  const double lambda = s.lambdas.front();

  const SdarSolution sol = solve_sdar_model(s, profile);
  const PerfReport reduced = perf_report(sol);

  const JointChain chain = build_joint_chain(s.m, s.buffer.k, lambda, profile, slots);
  const OracleResult exact = joint_stationary(chain, lambda, profile, slots);

  DiscrepancyReport r;
  r.m = s.m;
  r.k_buf = s.buffer.k;
  r.lambda = lambda;
  for (int n = 0; n <= s.m; ++n)
    r.tv_n_marginal += std::abs(reduced.p_n[static_cast<std::size_t>(n)] -
                                exact.p_n[static_cast<std::size_t>(n)]);
  r.tv_n_marginal *= 0.5;
  r.gamma_oracle = exact.gamma;
  r.gamma_reduced = reduced.gamma;
  r.gamma_rel_err = std::abs(reduced.gamma - exact.gamma) / std::max(exact.gamma, 1e-300);
  r.theta_oracle = exact.theta_agg;
  r.theta_reduced = reduced.theta_agg;
  r.theta_rel_err = std::abs(reduced.theta_agg - exact.theta_agg) / exact.theta_agg;
  r.wbar_oracle = exact.w_bar;
  r.wbar_reduced = reduced.w_bar;
  r.wbar_rel_err = std::abs(reduced.w_bar - exact.w_bar) / exact.w_bar;
  r.q_gap.assign(static_cast<std::size_t>(s.m), 0.0);
  for (int n = 1; n <= s.m; ++n)
    r.q_gap[static_cast<std::size_t>(n - 1)] =
        std::abs(sol.q.at(n) - exact.q_exact[static_cast<std::size_t>(n - 1)]);
  return r;
}

std::string discrepancy_json(const DiscrepancyReport& r) {
  nlohmann::json j;
  j["m"] = r.m;
  j["k"] = r.k_buf;
  j["lambda"] = r.lambda;
  j["tv_n_marginal"] = r.tv_n_marginal;
  j["gamma"] = {{"oracle", r.gamma_oracle}, {"reduced", r.gamma_reduced}, {"rel_err", r.gamma_rel_err}};
  j["theta"] = {{"oracle", r.theta_oracle}, {"reduced", r.theta_reduced}, {"rel_err", r.theta_rel_err}};
  j["w_bar"] = {{"oracle", r.wbar_oracle}, {"reduced", r.wbar_reduced}, {"rel_err", r.wbar_rel_err}};
  j["q_gap"] = r.q_gap;
  return j.dump(2);
}

}  // namespace sdar
