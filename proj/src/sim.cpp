#include "sdar/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "sdar/errors.hpp"
#include "sdar/rng.hpp"

namespace sdar {

long SimStats::attempts() const {
  long v = 0;
  for (const auto& ns : node) v += ns.attempts;
  return v;
}
long SimStats::collisions() const {
  long v = 0;
  for (const auto& ns : node) v += ns.collisions;
  return v;
}
long SimStats::successes() const {
  long v = 0;
  for (const auto& ns : node) v += ns.successes;
  return v;
}
long SimStats::accepted() const {
  long v = 0;
  for (const auto& ns : node) v += ns.accepted;
  return v;
}
long SimStats::blocked() const {
  long v = 0;
  for (const auto& ns : node) v += ns.blocked;
  return v;
}

namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

// RNG substream purposes
enum : std::uint32_t { kPurposeArrival = 0, kPurposeBackoff = 1 };

struct Trace {
  std::ofstream out;
  bool on = false;
  void open(const std::string& path) {
    if (path.empty()) return;
    out.open(path);
    if (!out) throw Error("cannot open trace file: " + path);
    on = true;
  }
  void event(Nanos t, const char* kind, int node, int n_nonempty) {
    if (on) out << t << ' ' << kind << ' ' << node << ' ' << n_nonempty << '\n';
  }
};

// State shared by both engines: per-node Poisson arrival streams, queues,
// window-clipped tallies, backlog sampling.
struct Cell {
  const Scenario& sc;
  SimOptions opt;
  SlotDurations slots;
  SimStats stats;
  Trace trace;

  std::vector<Rng> arrival_rng;
  std::vector<Nanos> next_arrival;
  std::vector<std::deque<Nanos>> queue;  // arrival timestamps
  std::vector<Nanos> hol_since;          // when the current HOL packet reached the head
  std::vector<Nanos> busy_since;         // boundary at which the queue went non-empty
  int n_nonempty = 0;

  Nanos horizon_ns = 0;
  Nanos warmup_ns = 0;
  Nanos sample_step = 0;
  Nanos next_sample = kNever;

  Cell(const Scenario& s, const SimOptions& o) : sc(s), opt(o) {
    validate_scenario(s);
    if (!(o.horizon > 0)) throw ConfigError("simulate: horizon must be > 0");
    slots = slot_durations_for(s);
    horizon_ns = seconds_to_nanos(o.horizon);
    warmup_ns = seconds_to_nanos(o.horizon * o.warmup_fraction);

    stats.m = s.m;
    stats.seed = o.seed;
    stats.horizon = o.horizon;
    stats.warmup = nanos_to_seconds(warmup_ns);
    stats.node.resize(static_cast<std::size_t>(s.m));
    if (s.buffer.is_finite)
      for (auto& ns : stats.node)
        ns.left_behind.assign(static_cast<std::size_t>(s.buffer.k), 0);
    stats.idle_slots.assign(static_cast<std::size_t>(s.m) + 1, 0);
    stats.succ_slots.assign(static_cast<std::size_t>(s.m) + 1, 0);
    stats.coll_slots.assign(static_cast<std::size_t>(s.m) + 1, 0);
    stats.attempts_hist.assign(static_cast<std::size_t>(s.m) + 1,
                               std::vector<long>(static_cast<std::size_t>(s.m) + 1, 0));

    queue.resize(static_cast<std::size_t>(s.m));
    hol_since.assign(static_cast<std::size_t>(s.m), 0);
    busy_since.assign(static_cast<std::size_t>(s.m), 0);
    for (int i = 0; i < s.m; ++i) {
      arrival_rng.push_back(Rng::substream(o.seed, static_cast<std::uint32_t>(i), kPurposeArrival));
      next_arrival.push_back(draw_arrival(i, 0));
    }
    if (o.backlog_samples > 0) {
      sample_step = horizon_ns / o.backlog_samples;
      next_sample = sample_step;
    }
    if (o.track_joint_states) {
      if (!s.buffer.is_finite)
        throw ConfigError("simulate: joint-state tracking needs finite K");
      double states = 1.0;
      for (int i = 0; i < s.m; ++i) states *= s.buffer.k + 1;
      if (states > 1e6)
        throw ConfigError("simulate: joint-state space too large to tally");
      stats.joint_visits.assign(static_cast<std::size_t>(states), 0);
    }
    trace.open(o.trace_path);
  }

  Nanos draw_arrival(int i, Nanos after) {
    const double rate = sc.lambdas[static_cast<std::size_t>(i)];
    if (rate <= 0.0) return kNever;
    return after + seconds_to_nanos(arrival_rng[static_cast<std::size_t>(i)].exponential(rate));
  }

  bool in_window(Nanos t) const { return t >= warmup_ns && t < horizon_ns; }

  Nanos min_arrival() const {
    Nanos v = kNever;
    for (const Nanos a : next_arrival) v = std::min(v, a);
    return v;
  }

  long total_backlog() const {
    long v = 0;
    for (const auto& q : queue) v += static_cast<long>(q.size());
    return v;
  }

  void sample_backlog(Nanos t) {
    while (next_sample != kNever && t >= next_sample && next_sample <= horizon_ns) {
      stats.backlog.emplace_back(nanos_to_seconds(next_sample), total_backlog());
      next_sample += sample_step;
    }
  }

  // Registers every arrival with timestamp strictly before t (an arrival
  // landing exactly on a boundary is taken into account at the next one).
  // Returns true when some empty queue became non-empty.
  bool register_arrivals(Nanos t) {
    bool changed = false;
    for (int i = 0; i < sc.m; ++i) {
      auto& q = queue[static_cast<std::size_t>(i)];
      while (next_arrival[static_cast<std::size_t>(i)] < t) {
        const Nanos at = next_arrival[static_cast<std::size_t>(i)];
        NodeStats& ns = stats.node[static_cast<std::size_t>(i)];
        const bool full =
            sc.buffer.is_finite && static_cast<int>(q.size()) >= sc.buffer.k;
        if (full) {
          if (in_window(at)) ++ns.blocked;
          trace.event(at, "blocked", i, n_nonempty);
        } else {
          if (q.empty()) {
            ++n_nonempty;
            changed = true;
            hol_since[static_cast<std::size_t>(i)] = t;  // becomes HOL at this boundary
            busy_since[static_cast<std::size_t>(i)] = t;
          }
          q.push_back(at);
          ++ns.total_accepted;
          if (in_window(at)) ++ns.accepted;
          trace.event(at, "arrival", i, n_nonempty);
        }
        next_arrival[static_cast<std::size_t>(i)] = draw_arrival(i, at);
      }
    }
    return changed;
  }

  // Departure of the HOL packet of node i; dep_time is the instant used for
  // delay accounting, end_boundary the instant the next packet (if any)
  // reaches the head of line.
  void depart(int i, Nanos dep_time, Nanos end_boundary, bool success) {
    auto& q = queue[static_cast<std::size_t>(i)];
    NodeStats& ns = stats.node[static_cast<std::size_t>(i)];
    const Nanos arrived = q.front();
    q.pop_front();
    if (q.empty()) {
      --n_nonempty;
      ns.busy_time += window_overlap(busy_since[static_cast<std::size_t>(i)], end_boundary);
    }
    ++ns.total_departed;
    if (in_window(dep_time)) {
      // a dequeue is either an ACKed success or a retry-limit drop; service
      // time (HOL-to-dequeue) covers both
      ns.service_sum += nanos_to_seconds(dep_time - hol_since[static_cast<std::size_t>(i)]);
      if (success) {
        ++ns.successes;
        ns.delay_sum += nanos_to_seconds(dep_time - arrived);
      } else {
        ++ns.dropped;
      }
    }
    hol_since[static_cast<std::size_t>(i)] = end_boundary;
  }

  void record_left_behind(int i) {
    if (!sc.buffer.is_finite) return;
    auto& hist = stats.node[static_cast<std::size_t>(i)].left_behind;
    const int j = std::min<int>(static_cast<int>(queue[static_cast<std::size_t>(i)].size()),
                                sc.buffer.k - 1);
    ++hist[static_cast<std::size_t>(j)];
  }

  void finish() {
    for (int i = 0; i < sc.m; ++i) {
      NodeStats& ns = stats.node[static_cast<std::size_t>(i)];
      ns.final_queue = static_cast<long>(queue[static_cast<std::size_t>(i)].size());
      if (!queue[static_cast<std::size_t>(i)].empty())
        ns.busy_time += window_overlap(busy_since[static_cast<std::size_t>(i)], horizon_ns);
    }
  }

  // window overlap of [a,b) in seconds
  double window_overlap(Nanos a, Nanos b) const {
    const Nanos lo = std::max(a, warmup_ns);
    const Nanos hi = std::min(b, horizon_ns);
    return hi > lo ? nanos_to_seconds(hi - lo) : 0.0;
  }

  long joint_state_index() const {
    long idx = 0;
    for (const auto& q : queue) idx = idx * (sc.buffer.k + 1) + static_cast<long>(q.size());
    return idx;
  }

  void tally_joint_state(long slot_count) {
    if (!stats.joint_visits.empty())
      stats.joint_visits[static_cast<std::size_t>(joint_state_index())] += slot_count;
  }

  // idle channel slots [from, from + count*sigma) at occupancy n; returns the
  // number of slots whose start lies inside the measurement window
  long tally_idle_run(Nanos from, long count, int n) {
    if (count <= 0) return 0;
    const Nanos sigma = slots.sigma_ns;
    long in = count;
    // clip slots whose start falls outside the window
    if (from < warmup_ns)
      in -= std::min<long>(count, (warmup_ns - from + sigma - 1) / sigma);
    const Nanos last = from + (count - 1) * sigma;
    if (last >= horizon_ns)
      in -= std::min<long>(in, (last - horizon_ns) / sigma + 1);
    if (in <= 0) return 0;
    stats.idle_slots[static_cast<std::size_t>(n)] += in;
    stats.attempts_hist[static_cast<std::size_t>(n)][0] += in;
    return in;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// SDAR engine
// ---------------------------------------------------------------------------

SimStats run_sdar(const Scenario& s, const AttemptProfile& profile,
                  const SimOptions& options) {
  if (profile.m() < s.m) throw ConfigError("run_sdar: profile does not cover n = 1..M");
  const auto wall_start = std::chrono::steady_clock::now();

  Cell cell(s, options);
  const Nanos sigma = cell.slots.sigma_ns;

  std::vector<Rng> backoff_rng;
  for (int i = 0; i < s.m; ++i)
    backoff_rng.push_back(Rng::substream(options.seed, static_cast<std::uint32_t>(i), kPurposeBackoff));

  std::vector<long> counter(static_cast<std::size_t>(s.m), 0);
  bool counters_valid = false;
  std::vector<int> pending_departures;

  Nanos t = 0;
  while (true) {
    // boundary bookkeeping: departures already applied, now this boundary's
    // arrivals, then the left-behind histogram sees q - D + A
    const bool n_changed = cell.register_arrivals(t);
    if (n_changed) counters_valid = false;
    for (const int node : pending_departures) cell.record_left_behind(node);
    pending_departures.clear();
    cell.sample_backlog(t);
    if (t >= cell.horizon_ns) break;

    const int n = cell.n_nonempty;
    if (n == 0) {
      const Nanos a_min = cell.min_arrival();
      if (a_min >= cell.horizon_ns) {
        cell.stats.empty_time += cell.window_overlap(t, cell.horizon_ns);
        t = cell.horizon_ns;
        continue;
      }
      // system-empty periods advance in whole backoff slots
      const long jump = (a_min - t) / sigma + 1;
      cell.tally_joint_state(cell.tally_idle_run(t, jump, 0));
      cell.stats.empty_time += cell.window_overlap(t, t + jump * sigma);
      t += jump * sigma;
      continue;
    }

    if (!counters_valid) {
      // the number of contenders changed: cancel whatever was scheduled and
      // sample fresh geometric backoffs with the current beta_n
      const double beta = profile.beta(n);
      for (int i = 0; i < s.m; ++i)
        if (!cell.queue[static_cast<std::size_t>(i)].empty())
          counter[static_cast<std::size_t>(i)] =
              backoff_rng[static_cast<std::size_t>(i)].geometric_from_one(beta);
      counters_valid = true;
    }

    long b_min = std::numeric_limits<long>::max();
    for (int i = 0; i < s.m; ++i)
      if (!cell.queue[static_cast<std::size_t>(i)].empty())
        b_min = std::min(b_min, counter[static_cast<std::size_t>(i)]);

    const Nanos t_attempt = t + (b_min - 1) * sigma;

    // an arrival registering at or before the attempt epoch preempts it
    const Nanos a_min = cell.min_arrival();
    if (a_min < t_attempt) {
      const Nanos t_reg = t + ((a_min - t) / sigma + 1) * sigma;
      if (t_reg <= t_attempt) {
        const long elapsed = (t_reg - t) / sigma;
        cell.tally_joint_state(cell.tally_idle_run(t, elapsed, n));
        for (int i = 0; i < s.m; ++i)
          if (!cell.queue[static_cast<std::size_t>(i)].empty())
            counter[static_cast<std::size_t>(i)] -= elapsed;
        t = t_reg;
        continue;  // loop top registers; resamples only if n changed
      }
    }

    // idle slots up to the attempt, then the activity slot
    cell.tally_joint_state(cell.tally_idle_run(t, b_min - 1, n));
    if (t_attempt >= cell.horizon_ns) {
      t = cell.horizon_ns;
      continue;
    }
    if (cell.in_window(t_attempt)) cell.tally_joint_state(1);
    std::vector<int> winners;
    for (int i = 0; i < s.m; ++i)
      if (!cell.queue[static_cast<std::size_t>(i)].empty() &&
          counter[static_cast<std::size_t>(i)] == b_min)
        winners.push_back(i);

    const bool tally = cell.in_window(t_attempt);
    if (tally) {
      auto& hist = cell.stats.attempts_hist[static_cast<std::size_t>(n)];
      ++hist[static_cast<std::size_t>(winners.size())];
    }

    if (winners.size() == 1) {
      const int w = winners.front();
      if (tally) {
        ++cell.stats.node[static_cast<std::size_t>(w)].attempts;
        ++cell.stats.succ_slots[static_cast<std::size_t>(n)];
      }
      const Nanos t_end = t_attempt + cell.slots.t_s_ns + sigma;
      const Nanos dep_time = t_attempt + cell.slots.t_s_ns - seconds_to_nanos(s.phy.difs);
      cell.trace.event(t_attempt, "success", w, n);
      cell.depart(w, dep_time, t_end, true);
      pending_departures.push_back(w);
      t = t_end;
    } else {
      for (const int w : winners) {
        if (tally) {
          ++cell.stats.node[static_cast<std::size_t>(w)].attempts;
          ++cell.stats.node[static_cast<std::size_t>(w)].collisions;
        }
        cell.trace.event(t_attempt, "collision", w, n);
      }
      if (tally) ++cell.stats.coll_slots[static_cast<std::size_t>(n)];
      t = t_attempt + cell.slots.t_c_ns + sigma;
    }
    counters_valid = false;  // activity finished: schedule afresh
  }

  cell.finish();
  cell.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return cell.stats;
}

// ---------------------------------------------------------------------------
// DCF reference engine
// ---------------------------------------------------------------------------

namespace {

int contention_window(const MacParams& mac, int stage) {
  long w = mac.cw_min + 1;
  for (int k = 0; k < stage; ++k) {
    w *= mac.backoff_multiplier;
    if (w >= mac.cw_max + 1) return mac.cw_max;
  }
  return static_cast<int>(w - 1);
}

}  // namespace

SimStats run_dcf(const Scenario& s, const SimOptions& options) {
  const auto wall_start = std::chrono::steady_clock::now();

  Cell cell(s, options);
  const Nanos sigma = cell.slots.sigma_ns;
  const Nanos difs = seconds_to_nanos(s.phy.difs);

  std::vector<Rng> backoff_rng;
  for (int i = 0; i < s.m; ++i)
    backoff_rng.push_back(Rng::substream(options.seed, static_cast<std::uint32_t>(i), kPurposeBackoff));

  std::vector<int> counter(static_cast<std::size_t>(s.m), 0);
  std::vector<int> stage(static_cast<std::size_t>(s.m), 0);
  std::vector<bool> was_empty(static_cast<std::size_t>(s.m), true);
  std::vector<int> pending_departures;

  const auto fresh_backoff = [&](int i) {
    stage[static_cast<std::size_t>(i)] = 0;
    counter[static_cast<std::size_t>(i)] =
        backoff_rng[static_cast<std::size_t>(i)].uniform_int(0, contention_window(s.mac, 0));
  };

  Nanos t = 0;
  while (true) {
    cell.register_arrivals(t);
    // nodes whose queue went non-empty at this boundary draw their first
    // backoff (no immediate access; see README)
    for (int i = 0; i < s.m; ++i) {
      const bool empty = cell.queue[static_cast<std::size_t>(i)].empty();
      if (was_empty[static_cast<std::size_t>(i)] && !empty) fresh_backoff(i);
      was_empty[static_cast<std::size_t>(i)] = empty;
    }
    for (const int node : pending_departures) cell.record_left_behind(node);
    pending_departures.clear();
    cell.sample_backlog(t);
    if (t >= cell.horizon_ns) break;

    const int n = cell.n_nonempty;
    if (n == 0) {
      const Nanos a_min = cell.min_arrival();
      if (a_min >= cell.horizon_ns) {
        cell.stats.empty_time += cell.window_overlap(t, cell.horizon_ns);
        t = cell.horizon_ns;
        continue;
      }
      // real DCF timing: medium long idle, the newcomer defers DIFS and the
      // slot grid re-anchors there
      cell.stats.empty_time += cell.window_overlap(t, a_min);
      t = a_min + difs;
      continue;
    }

    std::vector<int> winners;
    for (int i = 0; i < s.m; ++i)
      if (!cell.queue[static_cast<std::size_t>(i)].empty() &&
          counter[static_cast<std::size_t>(i)] == 0)
        winners.push_back(i);

    if (winners.empty()) {
      if (cell.in_window(t)) {
        ++cell.stats.idle_slots[static_cast<std::size_t>(n)];
        ++cell.stats.attempts_hist[static_cast<std::size_t>(n)][0];
      }
      for (int i = 0; i < s.m; ++i)
        if (!cell.queue[static_cast<std::size_t>(i)].empty()) --counter[static_cast<std::size_t>(i)];
      t += sigma;
      continue;
    }

    const bool tally = cell.in_window(t);
    if (tally) {
      auto& hist = cell.stats.attempts_hist[static_cast<std::size_t>(n)];
      ++hist[std::min(winners.size(), hist.size() - 1)];
    }

    if (winners.size() == 1) {
      const int w = winners.front();
      if (tally) {
        ++cell.stats.node[static_cast<std::size_t>(w)].attempts;
        ++cell.stats.succ_slots[static_cast<std::size_t>(n)];
      }
      const Nanos t_end = t + cell.slots.t_s_ns;  // ends with DIFS
      const Nanos dep_time = t_end - difs;        // ACK completion
      cell.trace.event(t, "success", w, n);
      cell.depart(w, dep_time, t_end, true);
      pending_departures.push_back(w);
      if (!cell.queue[static_cast<std::size_t>(w)].empty()) fresh_backoff(w);
      was_empty[static_cast<std::size_t>(w)] = cell.queue[static_cast<std::size_t>(w)].empty();
      t = t_end;
    } else {
      if (tally) ++cell.stats.coll_slots[static_cast<std::size_t>(n)];
      const Nanos t_end = t + cell.slots.t_c_ns;
      for (const int w : winners) {
        if (tally) {
          ++cell.stats.node[static_cast<std::size_t>(w)].attempts;
          ++cell.stats.node[static_cast<std::size_t>(w)].collisions;
        }
        cell.trace.event(t, "collision", w, n);
        auto& st = stage[static_cast<std::size_t>(w)];
        ++st;
        if (st > s.mac.retry_limit) {
          // drop, next HOL packet starts at stage 0
          cell.depart(w, t_end, t_end, false);
          pending_departures.push_back(w);
          cell.trace.event(t_end, "drop", w, n);
          if (!cell.queue[static_cast<std::size_t>(w)].empty()) fresh_backoff(w);
          was_empty[static_cast<std::size_t>(w)] = cell.queue[static_cast<std::size_t>(w)].empty();
        } else {
          counter[static_cast<std::size_t>(w)] =
              backoff_rng[static_cast<std::size_t>(w)].uniform_int(0, contention_window(s.mac, st));
        }
      }
      t = t_end;
    }
  }

  cell.finish();
  cell.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return cell.stats;
}

// ---------------------------------------------------------------------------

EmpiricalReport empirical_report(const SimStats& stats) {
  if (stats.attempts() == 0) throw EmptyRun("empirical_report: no attempts recorded");
  EmpiricalReport r;
  const double window = stats.measured_time();
  r.gamma = static_cast<double>(stats.collisions()) / static_cast<double>(stats.attempts());
  long offered = 0, blocked = 0, departed = 0;
  double delay_sum = 0.0;
  for (const NodeStats& ns : stats.node) {
    r.gamma_node.push_back(ns.attempts > 0 ? static_cast<double>(ns.collisions) / ns.attempts : 0.0);
    r.theta_node.push_back(static_cast<double>(ns.successes) / window);
    r.w_bar_node.push_back(ns.successes > 0 ? ns.delay_sum / ns.successes : 0.0);
    const long dequeued = ns.successes + ns.dropped;
    r.service_node.push_back(dequeued > 0 ? ns.service_sum / dequeued : 0.0);
    offered += ns.accepted + ns.blocked;
    blocked += ns.blocked;
    departed += ns.successes;
    delay_sum += ns.delay_sum;
  }
  r.theta_agg = static_cast<double>(stats.successes()) / window;
  r.w_bar = departed > 0 ? delay_sum / departed : 0.0;
  r.block_prob = offered > 0 ? static_cast<double>(blocked) / offered : 0.0;
  r.empty_fraction = stats.empty_time / window;

  const std::size_t bins = stats.idle_slots.size();
  r.p_idle_given_n.assign(bins, 0.0);
  r.p_succ_given_n.assign(bins, 0.0);
  r.p_coll_given_n.assign(bins, 0.0);
  r.slots_given_n.assign(bins, 0);
  for (std::size_t nn = 0; nn < bins; ++nn) {
    const long total = stats.idle_slots[nn] + stats.succ_slots[nn] + stats.coll_slots[nn];
    r.slots_given_n[nn] = total;
    if (total > 0) {
      r.p_idle_given_n[nn] = static_cast<double>(stats.idle_slots[nn]) / total;
      r.p_succ_given_n[nn] = static_cast<double>(stats.succ_slots[nn]) / total;
      r.p_coll_given_n[nn] = static_cast<double>(stats.coll_slots[nn]) / total;
    }
  }
  return r;
}

}  // namespace sdar
