#include "sdar/wlan_params.hpp"

#include <cmath>

#include "sdar/errors.hpp"

namespace sdar {

Nanos seconds_to_nanos(double seconds) {
  return static_cast<Nanos>(std::llround(seconds * 1e9));
}

double nanos_to_seconds(Nanos ns) { return static_cast<double>(ns) * 1e-9; }

PhyParams phy_80211b() { return PhyParams{}; }

bool Scenario::equal_rates() const {
  for (const double l : lambdas)
    if (l != lambdas.front()) return false;
  return true;
}

double Scenario::lambda_total() const {
  double sum = 0.0;
  for (const double l : lambdas) sum += l;
  return sum;
}

Scenario scenario_80211b(int m, double lambda_per_node, Buffer buffer,
                         long app_payload_bytes) {
  Scenario s;
  s.m = m;
  s.lambdas.assign(static_cast<std::size_t>(m), lambda_per_node);
  s.buffer = buffer;
  s.payload_bits = app_payload_bytes * 8 + kIpUdpOverheadBits;
  s.access_mode = AccessMode::Basic;
  s.phy = phy_80211b();
  s.mac = MacParams{};
  return s;
}

namespace {

double frame_airtime(const PhyParams& phy, long bits, double rate) {
  return phy.plcp_overhead + static_cast<double>(bits) / rate;
}

}  // namespace

SlotDurations compute_slot_durations(const PhyParams& phy, long payload_bits,
                                     long mac_header_bits, AccessMode mode) {
  if (phy.sigma <= 0 || phy.sifs <= 0 || phy.difs <= 0 || phy.plcp_overhead < 0)
    throw ConfigError("compute_slot_durations: durations must be positive");
  if (phy.difs <= phy.sifs)
    throw ConfigError("compute_slot_durations: DIFS must exceed SIFS");
  if (phy.basic_rate <= 0 || phy.data_rate <= 0)
    throw ConfigError("compute_slot_durations: rates must be positive");
  if (payload_bits <= 0)
    throw ConfigError("compute_slot_durations: payload_bits must be positive");

  const double t_data = frame_airtime(phy, mac_header_bits + payload_bits, phy.data_rate);
  const double t_ack = frame_airtime(phy, phy.ack_bits, phy.basic_rate);

  double t_s = 0.0, t_c = 0.0;
  switch (mode) {
    case AccessMode::Basic:
      t_s = t_data + phy.sifs + t_ack + phy.difs;
      t_c = t_data + phy.difs;
      break;
    case AccessMode::RtsCts: {
      const double t_rts = frame_airtime(phy, phy.rts_bits, phy.basic_rate);
      const double t_cts = frame_airtime(phy, phy.cts_bits, phy.basic_rate);
      t_s = t_rts + phy.sifs + t_cts + phy.sifs + t_data + phy.sifs + t_ack + phy.difs;
      t_c = t_rts + phy.difs;
      break;
    }
  }

  SlotDurations out;
  out.sigma_ns = seconds_to_nanos(phy.sigma);
  out.t_s_ns = seconds_to_nanos(t_s);
  out.t_c_ns = seconds_to_nanos(t_c);
  return out;
}

SlotDurations slot_durations_for(const Scenario& s) {
  return compute_slot_durations(s.phy, s.payload_bits, s.phy.mac_header_bits,
                                s.access_mode);
}

Scenario validate_scenario(const Scenario& s, std::vector<std::string>* notes) {
  if (s.m < 1) throw ConfigError("NonPositiveNodes: node count must be >= 1");
  if (s.lambdas.size() != static_cast<std::size_t>(s.m))
    throw ConfigError("scenario: lambdas must have one entry per node");
  for (const double l : s.lambdas)
    if (l < 0) throw ConfigError("NegativeRate: arrival rates must be >= 0");
  if (s.buffer.is_finite && s.buffer.k < 1)
    throw ConfigError("ZeroBuffer: finite buffer must hold >= 1 packet");
  if (s.payload_bits <= 0)
    throw ConfigError("scenario: payload_bits must be positive");
  if (s.mac.cw_min < 1 || s.mac.cw_max < s.mac.cw_min)
    throw ConfigError("scenario: need cw_max >= cw_min >= 1");
  if (s.mac.retry_limit < 0)
    throw ConfigError("scenario: retry_limit must be >= 0");
  if (s.mac.backoff_multiplier < 1)
    throw ConfigError("scenario: backoff_multiplier must be >= 1");
  compute_slot_durations(s.phy, s.payload_bits, s.phy.mac_header_bits, s.access_mode);

  if (notes && !s.equal_rates())
    notes->push_back("unequal rates: simulation only (analytical path requires equal lambda_i)");
  if (notes && !s.buffer.is_finite)
    notes->push_back("infinite buffer: analytical path requires finite K (simulation only)");
  return s;
}

}  // namespace sdar
