#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdar/saturation.hpp"
#include "sdar/wlan_params.hpp"

namespace sdar {

struct SimOptions {
  std::uint64_t seed = 1;
  double horizon = 10.0;          // simulated seconds
  double warmup_fraction = 0.05;  // tallies start after this fraction
  int backlog_samples = 0;        // aggregate-backlog time series points (0 = off)
  std::string trace_path;         // per-event trace file ("" = off)
  // tally joint queue-state visits at slot boundaries (finite K, small (K+1)^M;
  // SDAR engine only) for comparison against the exact chain
  bool track_joint_states = false;
};

struct NodeStats {
  // measured window
  long attempts = 0;
  long collisions = 0;
  long successes = 0;
  long accepted = 0;
  long blocked = 0;
  long dropped = 0;
  double delay_sum = 0.0;    // seconds, summed over departures in the window
  double service_sum = 0.0;  // seconds, HOL-to-dequeue
  double busy_time = 0.0;    // seconds with a non-empty queue, in the window
  // full-run conservation counters
  long total_accepted = 0;
  long total_departed = 0;   // successes + drops over the full run
  long final_queue = 0;
  // departures that left j packets behind (j >= K-1 folded), finite K only
  std::vector<long> left_behind;
};

struct SimStats {
  int m = 0;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double warmup = 0.0;  // seconds excluded in front
  std::vector<NodeStats> node;
  // channel-slot tallies in the window, indexed by n = number of non-empty
  // nodes at the slot's starting boundary
  std::vector<long> idle_slots, succ_slots, coll_slots;
  // boundaries with exactly a attempts given n non-empty (SDAR engine)
  std::vector<std::vector<long>> attempts_hist;
  double empty_time = 0.0;  // system-empty seconds in the window
  std::vector<std::pair<double, long>> backlog;  // (t seconds, total queued)
  // slot-boundary visits per joint state (track_joint_states), index in
  // (K+1)-ary big-endian node order
  std::vector<long> joint_visits;
  double wall_seconds = 0.0;

  double measured_time() const { return horizon - warmup; }
  long attempts() const;
  long collisions() const;
  long successes() const;
  long accepted() const;
  long blocked() const;
};

// Model-based engine: geometric backoffs with mean 1/beta_n resampled
// whenever the number of non-empty nodes changes, minimum wins, ties collide,
// arrivals deferred to channel-slot boundaries.
SimStats run_sdar(const Scenario& s, const AttemptProfile& profile,
                  const SimOptions& options);

// Reference engine: full CSMA/CA with binary exponential backoff, counter
// freezing during activity, zero backoffs allowed, retransmit-limit drops.
SimStats run_dcf(const Scenario& s, const SimOptions& options);

struct EmpiricalReport {
  double gamma = 0.0;                 // collisions / attempts
  std::vector<double> gamma_node;
  double theta_agg = 0.0;             // successes / measured time
  std::vector<double> theta_node;
  double w_bar = 0.0;                 // mean sojourn of departed packets
  std::vector<double> w_bar_node;
  std::vector<double> service_node;   // mean HOL-to-dequeue time
  double block_prob = 0.0;            // blocked / offered
  double empty_fraction = 0.0;
  // P(slot type | n non-empty) from the slot tallies
  std::vector<double> p_idle_given_n, p_succ_given_n, p_coll_given_n;
  std::vector<long> slots_given_n;
};

EmpiricalReport empirical_report(const SimStats& stats);

}  // namespace sdar
