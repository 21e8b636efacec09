#include "sdar/perf.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "sdar/errors.hpp"

namespace sdar {

std::vector<double> occupancy_distribution(const StationaryDist& pi, int k_buf, int m) {
  std::vector<double> p_n(static_cast<std::size_t>(m) + 1, 0.0);
  for (int n = 0; n <= m; ++n) {
    double v = 0.0;
    if (n <= m - 1) v += pi.at(0, n);
    if (n >= 1)
      for (int j = 1; j <= k_buf; ++j) v += pi.at(j, n - 1);
    p_n[static_cast<std::size_t>(n)] = v;
  }
  return p_n;
}

double collision_probability(const std::vector<double>& p_n, const AttemptProfile& profile) {
  double num = 0.0, den = 0.0;
  for (std::size_t n = 1; n < p_n.size(); ++n) {
    const double b = profile.beta(static_cast<int>(n));
    const double attempts = static_cast<double>(n) * b;
    num += p_n[n] * attempts * (1.0 - std::pow(1.0 - b, static_cast<int>(n) - 1));
    den += p_n[n] * attempts;
  }
  if (!(den > 0.0)) throw NoAttempts("collision_probability: no attempting states");
  return num / den;
}

std::pair<double, double> throughput(const std::vector<double>& p_n,
                                     const AttemptProfile& profile,
                                     const SlotDurations& slots) {
  const int m = static_cast<int>(p_n.size()) - 1;
  double num = 0.0, den = 0.0;
  for (int n = 0; n <= m; ++n) {
    double p_succ = 0.0, p_coll = 0.0;
    if (n >= 1) {
      const double b = profile.beta(n);
      p_succ = n * b * std::pow(1.0 - b, n - 1);
      p_coll = 1.0 - std::pow(1.0 - b, n) - p_succ;
    }
    const double l_mean = slots.sigma() + p_coll * slots.t_c() + p_succ * slots.t_s();
    num += p_n[static_cast<std::size_t>(n)] * p_succ;
    den += p_n[static_cast<std::size_t>(n)] * l_mean;
  }
  const double theta_agg = num / den;
  return {theta_agg, theta_agg / m};
}

std::vector<double> departure_distribution(const StationaryDist& pi,
                                           const SlotTypeProbs& stp,
                                           const ArrivalPmfs& pmfs, int k_buf) {
  const int m = pi.m();
  double den = 0.0;
  for (int i = 1; i <= k_buf; ++i)
    for (int n = 0; n < m; ++n)
      den += pi.at(i, n) * stp.succ[static_cast<std::size_t>(n + 1)] / (n + 1);
  if (!(den > 0.0))
    throw NoDepartures("departure_distribution: tagged queue never departs");

  std::vector<double> p_dep(static_cast<std::size_t>(k_buf), 0.0);
  double partial = 0.0;
  for (int j = 0; j <= k_buf - 2; ++j) {
    double num = 0.0;
    for (int i = 1; i <= j + 1; ++i)
      for (int n = 0; n < m; ++n)
        num += pi.at(i, n) * (stp.succ[static_cast<std::size_t>(n + 1)] / (n + 1)) *
               pmfs.s_at(j - i + 1);
    p_dep[static_cast<std::size_t>(j)] = num / den;
    partial += num / den;
  }
  p_dep[static_cast<std::size_t>(k_buf - 1)] = 1.0 - partial;  // complement
  return p_dep;
}

DelayResult delay(const std::vector<double>& p_dep, double theta_node, double lambda,
                  int k_buf) {
  if (!(lambda > 0.0)) throw ConfigError("delay: lambda must be > 0");
  // at light load theta carries the reduction's own error (~1e-7 relative),
  // so a small positive overshoot over lambda is expected and clamps to zero
  // blocking; anything past 1e-6 signals a genuinely broken input
  if (theta_node > lambda * (1.0 + 1e-6))
    throw InconsistentThroughput("delay: theta exceeds lambda, blocking would be negative");
  DelayResult r;
  r.block_prob = std::max(0.0, 1.0 - theta_node / lambda);
  r.alpha.assign(static_cast<std::size_t>(k_buf) + 1, 0.0);
  for (int j = 0; j <= k_buf - 1; ++j)
    r.alpha[static_cast<std::size_t>(j)] =
        p_dep[static_cast<std::size_t>(j)] * (1.0 - r.block_prob);
  r.alpha[static_cast<std::size_t>(k_buf)] = r.block_prob;
  for (int j = 0; j <= k_buf; ++j) r.q_bar += j * r.alpha[static_cast<std::size_t>(j)];
  r.w_bar = r.q_bar / theta_node;
  return r;
}

PerfReport perf_report(const SdarSolution& sol) {
  PerfReport r;
  r.m = sol.m;
  r.k_buf = sol.k_buf;
  r.lambda = sol.lambda;
  r.p_n = occupancy_distribution(sol.pi, sol.k_buf, sol.m);
  r.gamma = collision_probability(r.p_n, sol.profile);
  std::tie(r.theta_agg, r.theta_node) = throughput(r.p_n, sol.profile, sol.slots);
  r.p_dep = departure_distribution(sol.pi, sol.stp, sol.pmfs, sol.k_buf);
  const DelayResult d = delay(r.p_dep, r.theta_node, r.lambda, r.k_buf);
  r.alpha = d.alpha;
  r.q_bar = d.q_bar;
  r.w_bar = d.w_bar;
  r.block_prob = d.block_prob;
  return r;
}

std::string perf_csv_header() {
  return "m,k,lambda,gamma,theta_node,w_bar,q_bar,block_prob";
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::string perf_csv_row(const PerfReport& r) {
  std::ostringstream os;
  os << r.m << ',' << r.k_buf << ',' << fmt(r.lambda) << ',' << fmt(r.gamma) << ','
     << fmt(r.theta_node) << ',' << fmt(r.w_bar) << ',' << fmt(r.q_bar) << ','
     << fmt(r.block_prob);
  return os.str();
}

std::string perf_json(const PerfReport& r) {
  nlohmann::json j;
  j["m"] = r.m;
  j["k"] = r.k_buf;
  j["lambda"] = r.lambda;
  j["gamma"] = r.gamma;
  j["theta_agg"] = r.theta_agg;
  j["theta_node"] = r.theta_node;
  j["w_bar"] = r.w_bar;
  j["q_bar"] = r.q_bar;
  j["block_prob"] = r.block_prob;
  j["p_n"] = r.p_n;
  j["p_dep"] = r.p_dep;
  j["alpha"] = r.alpha;
  return j.dump(2);
}

}  // namespace sdar
