#pragma once

#include <string>
#include <vector>

#include "sdar/solver.hpp"

namespace sdar {

struct PerfReport {
  int m = 0;
  int k_buf = 0;
  double lambda = 0.0;         // per-node arrival rate (packets/s)
  std::vector<double> p_n;     // occupancy distribution, n = 0..M
  double gamma = 0.0;          // conditional collision probability
  double theta_agg = 0.0;      // aggregate throughput (packets/s)
  double theta_node = 0.0;     // per-node throughput (packets/s)
  double block_prob = 0.0;     // alpha(K)
  double q_bar = 0.0;          // mean queue length (packets)
  double w_bar = 0.0;          // mean packet delay (s)
  std::vector<double> p_dep;   // departure-left-behind, j = 0..K-1
  std::vector<double> alpha;   // time-fraction of queue length j, j = 0..K
};

// p(n) = pi(0,n) + sum_{j=1..K} pi(j, n-1), with the out-of-range terms zero.
std::vector<double> occupancy_distribution(const StationaryDist& pi, int k_buf, int m);

// gamma = sum_n p(n) E[C|n] / sum_n p(n) E[A|n]; E[A|n] = n b_n,
// E[C|n] = n b_n (1 - (1-b_n)^(n-1)). Throws NoAttempts when all mass sits at
// n = 0.
double collision_probability(const std::vector<double>& p_n, const AttemptProfile& profile);

// Theta = sum_n p(n) E[S|n] / sum_n p(n) E[L|n]; returns {aggregate, per-node}.
std::pair<double, double> throughput(const std::vector<double>& p_n,
                                     const AttemptProfile& profile,
                                     const SlotDurations& slots);

// Fraction of tagged-queue departures that leave j packets behind; the last
// entry j = K-1 closes the distribution by complement.
std::vector<double> departure_distribution(const StationaryDist& pi,
                                           const SlotTypeProbs& stp,
                                           const ArrivalPmfs& pmfs, int k_buf);

struct DelayResult {
  std::vector<double> alpha;   // j = 0..K
  double q_bar = 0.0;
  double w_bar = 0.0;
  double block_prob = 0.0;
};

// Level-crossing + flow balance: accepted-arrival distribution equals the
// departure distribution, alpha(K) = 1 - theta/lambda, alpha(j) scaled by the
// acceptance probability, Q from alpha, W = Q/theta.
DelayResult delay(const std::vector<double>& p_dep, double theta_node, double lambda,
                  int k_buf);

PerfReport perf_report(const SdarSolution& sol);

std::string perf_csv_header();
std::string perf_csv_row(const PerfReport& r);
std::string perf_json(const PerfReport& r);

}  // namespace sdar
