#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <semaphore>
#include <thread>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdar/errors.hpp"
#include "sdar/oracle.hpp"
#include "sdar/perf.hpp"
#include "sdar/sim.hpp"
#include "sdar/solver.hpp"

namespace {

using nlohmann::json;

struct RunConfig {
  sdar::Scenario scenario;
  sdar::AttemptModel model = sdar::AttemptModel::FiniteRetry;
  std::uint64_t seed = 1;
  double horizon = 100.0;
  double warmup_fraction = 0.05;
  std::string engine = "sdar";
  std::vector<double> sweep;
  bool sweep_simulate = false;
  std::string output;
  std::string trace;
};

sdar::PhyParams phy_from_json(const json& j) {
  sdar::PhyParams p = sdar::phy_80211b();
  if (j.contains("sigma")) p.sigma = j["sigma"];
  if (j.contains("sifs")) p.sifs = j["sifs"];
  if (j.contains("difs")) p.difs = j["difs"];
  if (j.contains("plcp_overhead")) p.plcp_overhead = j["plcp_overhead"];
  if (j.contains("mac_header_bits")) p.mac_header_bits = j["mac_header_bits"];
  if (j.contains("ack_bits")) p.ack_bits = j["ack_bits"];
  if (j.contains("rts_bits")) p.rts_bits = j["rts_bits"];
  if (j.contains("cts_bits")) p.cts_bits = j["cts_bits"];
  if (j.contains("basic_rate")) p.basic_rate = j["basic_rate"];
  if (j.contains("data_rate")) p.data_rate = j["data_rate"];
  return p;
}

sdar::MacParams mac_from_json(const json& j) {
  sdar::MacParams m;
  if (j.contains("cw_min")) m.cw_min = j["cw_min"];
  if (j.contains("cw_max")) m.cw_max = j["cw_max"];
  if (j.contains("retry_limit")) m.retry_limit = j["retry_limit"];
  if (j.contains("backoff_multiplier")) m.backoff_multiplier = j["backoff_multiplier"];
  return m;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sdar::ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw sdar::ConfigError(std::string("config parse error: ") + e.what());
  }

  RunConfig cfg;
  sdar::Scenario& s = cfg.scenario;
  if (!j.contains("m")) throw sdar::ConfigError("config: missing \"m\"");
  s.m = j["m"];
  if (j.contains("lambdas"))
    s.lambdas = j["lambdas"].get<std::vector<double>>();
  else if (j.contains("lambda"))
    s.lambdas.assign(static_cast<std::size_t>(std::max(s.m, 0)), j["lambda"].get<double>());
  else
    s.lambdas.assign(static_cast<std::size_t>(std::max(s.m, 0)), 0.0);

  if (j.contains("buffer")) {
    if (j["buffer"].is_string()) {
      if (j["buffer"] != "infinite")
        throw sdar::ConfigError("config: buffer must be an integer or \"infinite\"");
      s.buffer = sdar::Buffer::infinite();
    } else {
      s.buffer = sdar::Buffer::finite(j["buffer"].get<int>());
    }
  }
  if (j.contains("payload_bits"))
    s.payload_bits = j["payload_bits"];
  else if (j.contains("payload_bytes"))
    s.payload_bits = j["payload_bytes"].get<long>() * 8;
  if (j.contains("access_mode")) {
    const std::string mode = j["access_mode"];
    if (mode == "basic") s.access_mode = sdar::AccessMode::Basic;
    else if (mode == "rtscts") s.access_mode = sdar::AccessMode::RtsCts;
    else throw sdar::ConfigError("config: access_mode must be \"basic\" or \"rtscts\"");
  }
  if (j.contains("phy")) s.phy = phy_from_json(j["phy"]);
  if (j.contains("mac")) s.mac = mac_from_json(j["mac"]);

  if (j.contains("attempt_model")) {
    const std::string m = j["attempt_model"];
    if (m == "finite_retry") cfg.model = sdar::AttemptModel::FiniteRetry;
    else if (m == "bianchi") cfg.model = sdar::AttemptModel::BianchiInfinite;
    else throw sdar::ConfigError("config: attempt_model must be \"finite_retry\" or \"bianchi\"");
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("horizon")) cfg.horizon = j["horizon"];
  if (j.contains("warmup_fraction")) cfg.warmup_fraction = j["warmup_fraction"];
  if (j.contains("engine")) cfg.engine = j["engine"];
  if (j.contains("sweep")) cfg.sweep = j["sweep"].get<std::vector<double>>();
  if (j.contains("sweep_simulate")) cfg.sweep_simulate = j["sweep_simulate"];
  if (j.contains("output")) cfg.output = j["output"];
  if (j.contains("trace")) cfg.trace = j["trace"];

  // environment overrides
  if (const char* env_seed = std::getenv("SDAR_SEED"))
    cfg.seed = std::strtoull(env_seed, nullptr, 10);
  return cfg;
}

std::string resolve_output(const std::string& path) {
  if (path.empty()) return path;
  if (const char* dir = std::getenv("SDAR_OUTPUT_DIR"))
    return (std::filesystem::path(dir) / path).string();
  return path;
}

// stdout or file
void emit(const std::string& output, const std::string& text) {
  const std::string path = resolve_output(output);
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw sdar::Error("cannot open output file: " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

int cmd_saturation(const RunConfig& cfg) {
  sdar::validate_scenario(cfg.scenario);
  const auto profile = sdar::attempt_profile(cfg.scenario.m, cfg.scenario.mac, cfg.model);
  const auto slots = sdar::slot_durations_for(cfg.scenario);
  const auto curve = sdar::saturation_curve(profile, slots, cfg.scenario.m);
  std::ostringstream os;
  os.precision(12);
  os << "n,beta,gamma,theta_sat,l_sat,p_succ_sat\n";
  for (int n = 1; n <= cfg.scenario.m; ++n)
    os << n << ',' << profile.beta(n) << ',' << profile.gamma(n) << ','
       << curve.theta_sat[static_cast<std::size_t>(n)] << ','
       << curve.l_sat[static_cast<std::size_t>(n)] << ','
       << curve.p_succ_sat[static_cast<std::size_t>(n)] << '\n';
  emit(cfg.output, os.str());
  return 0;
}

int cmd_analyze(const RunConfig& cfg, bool as_json, const std::string& iteration_trace) {
  const auto profile = sdar::attempt_profile(cfg.scenario.m, cfg.scenario.mac, cfg.model);
  const auto sol = sdar::solve_sdar_model(cfg.scenario, profile);
  if (!iteration_trace.empty()) {
    std::ostringstream os;
    os.precision(12);
    os << "iteration,max_dq";
    for (int n = 1; n <= sol.m; ++n) os << ",q" << n;
    os << '\n';
    for (std::size_t it = 0; it < sol.report.q_history.size(); ++it) {
      os << it << ','
         << (it == 0 ? 0.0 : sol.report.residuals[it - 1]);
      for (int n = 1; n <= sol.m; ++n) os << ',' << sol.report.q_history[it].at(n);
      os << '\n';
    }
    emit(iteration_trace, os.str());
  }
  if (!sol.report.converged)
    throw sdar::NoConvergence("analyze: q iteration did not converge in " +
                              std::to_string(sol.report.iterations) + " iterations");
  const auto report = sdar::perf_report(sol);
  if (as_json) {
    emit(cfg.output, sdar::perf_json(report));
  } else {
    emit(cfg.output, sdar::perf_csv_header() + "\n" + sdar::perf_csv_row(report) + "\n");
  }
  return 0;
}

std::string describe_run(const char* name, const sdar::SimStats& stats) {
  const auto rep = sdar::empirical_report(stats);
  std::ostringstream os;
  os.precision(8);
  os << name << ": gamma=" << rep.gamma << " theta_agg=" << rep.theta_agg
     << " w_bar=" << rep.w_bar << " block=" << rep.block_prob
     << " empty_frac=" << rep.empty_fraction << '\n';
  for (std::size_t i = 0; i < rep.theta_node.size(); ++i)
    os << name << " node " << i << ": theta=" << rep.theta_node[i]
       << " gamma=" << rep.gamma_node[i] << " w_bar=" << rep.w_bar_node[i]
       << " service=" << rep.service_node[i] << '\n';
  return os.str();
}

int cmd_simulate(const RunConfig& cfg) {
  sdar::SimOptions opt;
  opt.seed = cfg.seed;
  opt.horizon = cfg.horizon;
  opt.warmup_fraction = cfg.warmup_fraction;
  opt.trace_path = cfg.trace;

  // wall-clock timings go to stderr so output files stay byte-identical
  // across runs of the same (config, seed)
  std::ostringstream os;
  if (cfg.engine == "sdar" || cfg.engine == "both") {
    const auto profile = sdar::attempt_profile(cfg.scenario.m, cfg.scenario.mac, cfg.model);
    const auto stats = sdar::run_sdar(cfg.scenario, profile, opt);
    os << describe_run("sdar", stats);
    std::cerr << "sdar wall-clock: " << stats.wall_seconds << " s\n";
    if (cfg.engine == "both") {
      const auto dcf = sdar::run_dcf(cfg.scenario, opt);
      os << describe_run("dcf", dcf);
      std::cerr << "dcf wall-clock: " << dcf.wall_seconds << " s\n"
                << "speedup dcf/sdar wall-clock ratio: "
                << dcf.wall_seconds / stats.wall_seconds << '\n';
    }
  } else if (cfg.engine == "dcf") {
    const auto stats = sdar::run_dcf(cfg.scenario, opt);
    os << describe_run("dcf", stats);
    std::cerr << "dcf wall-clock: " << stats.wall_seconds << " s\n";
  } else {
    throw sdar::ConfigError("simulate: engine must be sdar, dcf, or both");
  }
  emit(cfg.output, os.str());
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.sweep.empty()) throw sdar::ConfigError("sweep: config must list sweep lambdas");
  const auto profile = sdar::attempt_profile(cfg.scenario.m, cfg.scenario.mac, cfg.model);

  struct Row {
    sdar::PerfReport analytic;
    std::optional<sdar::EmpiricalReport> sim;
    std::optional<sdar::EmpiricalReport> dcf;
  };
  const bool with_dcf = cfg.engine == "both" || cfg.engine == "dcf";
  // independent sweep points run on a bounded worker pool; rows are emitted
  // in lambda order regardless of completion order
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::counting_semaphore<256> workers{static_cast<std::ptrdiff_t>(std::min(hw, 256u))};

  std::vector<std::future<Row>> rows;
  for (const double lambda : cfg.sweep) {
    rows.push_back(std::async(std::launch::async, [&, lambda] {
      workers.acquire();
      struct Release {
        std::counting_semaphore<256>& sem;
        ~Release() { sem.release(); }
      } release{workers};
      sdar::Scenario point = cfg.scenario;
      point.lambdas.assign(static_cast<std::size_t>(point.m), lambda);
      const auto sol = sdar::solve_sdar_model(point, profile);
      if (!sol.report.converged)
        throw sdar::NoConvergence("sweep: no convergence at lambda " + std::to_string(lambda));
      Row row{sdar::perf_report(sol), std::nullopt, std::nullopt};
      if (cfg.sweep_simulate) {
        sdar::SimOptions opt;
        opt.seed = cfg.seed;
        opt.horizon = cfg.horizon;
        opt.warmup_fraction = cfg.warmup_fraction;
        row.sim = sdar::empirical_report(sdar::run_sdar(point, profile, opt));
        if (with_dcf) row.dcf = sdar::empirical_report(sdar::run_dcf(point, opt));
      }
      return row;
    }));
  }

  std::ostringstream os;
  os.precision(12);
  os << sdar::perf_csv_header();
  if (cfg.sweep_simulate) {
    os << ",sim_gamma,sim_theta_node,sim_w_bar";
    if (with_dcf) os << ",dcf_gamma,dcf_theta_node,dcf_w_bar";
  }
  os << '\n';
  for (auto& fut : rows) {
    const Row row = fut.get();
    os << sdar::perf_csv_row(row.analytic);
    if (row.sim) {
      const double theta_node = row.sim->theta_agg / cfg.scenario.m;
      os << ',' << row.sim->gamma << ',' << theta_node << ',' << row.sim->w_bar;
    }
    if (row.dcf) {
      const double theta_node = row.dcf->theta_agg / cfg.scenario.m;
      os << ',' << row.dcf->gamma << ',' << theta_node << ',' << row.dcf->w_bar;
    }
    os << '\n';
  }
  emit(cfg.output, os.str());
  return 0;
}

int cmd_validate(const RunConfig& cfg) {
  const auto report = sdar::compare_reduced_vs_oracle(cfg.scenario, cfg.model);
  emit(cfg.output, sdar::discrepancy_json(report));
  return 0;
}

int cmd_dump_chain(const RunConfig& cfg) {
  if (!cfg.scenario.buffer.is_finite)
    throw sdar::ConfigError("dump-chain: requires finite K");
  const auto profile = sdar::attempt_profile(cfg.scenario.m, cfg.scenario.mac, cfg.model);
  const auto sol = sdar::solve_sdar_model(cfg.scenario, profile);
  const auto blocks = sdar::block_matrices(
      sol.m, sol.pmfs, sol.stp, std::max(0, sol.k_buf - 1));
  const auto tpm = sdar::assemble_tpm(blocks, sol.q, sol.k_buf);
  std::ostringstream os;
  os.precision(17);
  for (int r = 0; r < tpm.dim(); ++r) {
    for (int c = 0; c < tpm.dim(); ++c) os << (c ? "," : "") << tpm.p(r, c);
    os << '\n';
  }
  emit(cfg.output, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-cell IEEE 802.11 DCF performance toolkit"};
  app.require_subcommand(1);

  std::string config_path, output, engine, trace;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  bool as_json = false, simulate_sweep = false;

  const auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* opt = sub->add_option("-c,--config", config_path, "JSON config file");
    if (needs_config) opt->required();
    sub->add_option("-o,--output", output, "output file (default stdout)");
  };

  auto* sat = app.add_subcommand("saturation", "dump beta_n / Theta_sat,n as CSV");
  add_common(sat);
  auto* analyze = app.add_subcommand("analyze", "solve the coupled model, report measures");
  add_common(analyze);
  analyze->add_flag("--json", as_json, "emit JSON instead of CSV");
  std::string iteration_trace;
  analyze->add_option("--iteration-trace", iteration_trace,
                      "write the q-iteration history to this CSV file");
  auto* simulate = app.add_subcommand("simulate", "run a discrete-event simulation");
  add_common(simulate);
  simulate->add_option("--engine", engine, "sdar | dcf | both");
  auto* sim_seed = simulate->add_option("--seed", seed, "root RNG seed");
  simulate->add_option("--horizon", horizon, "simulated seconds");
  simulate->add_option("--trace", trace, "per-event trace file");
  auto* sweep = app.add_subcommand("sweep", "solve a lambda grid, one CSV row per point");
  add_common(sweep);
  sweep->add_flag("--simulate", simulate_sweep, "add simulated columns");
  auto* sweep_seed = sweep->add_option("--seed", seed, "root RNG seed");
  sweep->add_option("--horizon", horizon, "simulated seconds per point");
  auto* validate = app.add_subcommand("validate", "exact joint-chain discrepancy report");
  add_common(validate);
  auto* dump = app.add_subcommand("dump-chain", "emit the assembled transition matrix as CSV");
  add_common(dump);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    if (!output.empty()) cfg.output = output;
    if (sim_seed->count() > 0 || sweep_seed->count() > 0) cfg.seed = seed;
    if (const char* env_seed = std::getenv("SDAR_SEED"))
      cfg.seed = std::strtoull(env_seed, nullptr, 10);
    if (horizon > 0) cfg.horizon = horizon;
    if (!engine.empty()) cfg.engine = engine;
    if (!trace.empty()) cfg.trace = trace;
    if (simulate_sweep) cfg.sweep_simulate = true;

    if (sat->parsed()) return cmd_saturation(cfg);
    if (analyze->parsed()) return cmd_analyze(cfg, as_json, iteration_trace);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (validate->parsed()) return cmd_validate(cfg);
    if (dump->parsed()) return cmd_dump_chain(cfg);
  } catch (const sdar::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const sdar::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
