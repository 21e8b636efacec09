#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdar {

// Internal time unit: integer nanoseconds (exact event ordering in the
// simulators). Seconds only at the API surface.
using Nanos = std::int64_t;

Nanos seconds_to_nanos(double seconds);
double nanos_to_seconds(Nanos ns);

struct PhyParams {
  double sigma = 20e-6;          // backoff slot (s)
  double sifs = 10e-6;           // (s)
  double difs = 50e-6;           // (s)
  double plcp_overhead = 192e-6; // preamble + PLCP header airtime (s)
  long mac_header_bits = 28 * 8; // MAC header + FCS
  long ack_bits = 14 * 8;
  long rts_bits = 20 * 8;
  long cts_bits = 14 * 8;
  double basic_rate = 2e6;       // control frames (bits/s)
  double data_rate = 11e6;       // data frames (bits/s)
};

// 802.11b long-preamble defaults.
PhyParams phy_80211b();

struct MacParams {
  int cw_min = 31;
  int cw_max = 1023;
  int retry_limit = 7;       // max retransmissions R (R+1 transmissions total)
  int backoff_multiplier = 2;

  bool operator==(const MacParams&) const = default;
};

enum class AccessMode { Basic, RtsCts };

struct Buffer {
  static Buffer infinite() { return Buffer{false, 0}; }
  static Buffer finite(int k) { return Buffer{true, k}; }
  bool is_finite = false;
  int k = 0;  // valid only when finite
};

struct Scenario {
  int m = 1;
  std::vector<double> lambdas;   // packets/s, size m
  Buffer buffer = Buffer::infinite();
  long payload_bits = 8000;
  AccessMode access_mode = AccessMode::Basic;
  PhyParams phy;
  MacParams mac;

  bool equal_rates() const;
  double lambda_total() const;
};

// On-air payload carried by the 802.11b validation experiments: L bytes of
// application data plus the IP/UDP headers (see README, "Frame anatomy").
constexpr long kIpUdpOverheadBits = 28 * 8;

Scenario scenario_80211b(int m, double lambda_per_node, Buffer buffer,
                         long app_payload_bytes = 1000);

struct SlotDurations {
  Nanos sigma_ns = 0;
  Nanos t_s_ns = 0;  // success airtime incl. trailing DIFS
  Nanos t_c_ns = 0;  // collision airtime incl. trailing DIFS

  Nanos l_idle_ns() const { return sigma_ns; }
  Nanos l_succ_ns() const { return t_s_ns + sigma_ns; }
  Nanos l_coll_ns() const { return t_c_ns + sigma_ns; }

  double sigma() const { return nanos_to_seconds(sigma_ns); }
  double t_s() const { return nanos_to_seconds(t_s_ns); }
  double t_c() const { return nanos_to_seconds(t_c_ns); }
  double l_idle() const { return nanos_to_seconds(l_idle_ns()); }
  double l_succ() const { return nanos_to_seconds(l_succ_ns()); }
  double l_coll() const { return nanos_to_seconds(l_coll_ns()); }
};

// Frame anatomy. Basic: T_s = DATA+SIFS+ACK+DIFS, T_c = DATA+DIFS.
// RTS/CTS: T_s = RTS+SIFS+CTS+SIFS+DATA+SIFS+ACK+DIFS, T_c = RTS+DIFS.
// Control frames at basic_rate, data at data_rate, every frame pays
// plcp_overhead.
SlotDurations compute_slot_durations(const PhyParams& phy, long payload_bits,
                                     long mac_header_bits, AccessMode mode);

SlotDurations slot_durations_for(const Scenario& s);

// Throws ConfigError (NonPositiveNodes / NegativeRate / ZeroBuffer / shape
// mismatches). Soft diagnostics, e.g. "unequal rates: simulation only", are
// appended to *notes when provided.
Scenario validate_scenario(const Scenario& s, std::vector<std::string>* notes = nullptr);

}  // namespace sdar
