#include "neoqed/runner.hpp"

#include <chrono>
#include <cmath>

#include "neoqed/analysis.hpp"
#include "neoqed/error.hpp"
#include "neoqed/io.hpp"
#include "neoqed/protocols.hpp"

#ifndef NEOQED_VERSION
#define NEOQED_VERSION "unknown"
#endif

namespace neoqed {

using nlohmann::json;

std::string_view code_version() { return NEOQED_VERSION; }

ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOverrides& ov) {
  if (ov.frame) cfg.integrator.frame = *ov.frame;
  if (ov.fixed_step_us) {
    if (!(*ov.fixed_step_us > 0)) throw Error(ErrorKind::Config, "--fixed-step must be > 0");
    cfg.integrator.method = IntegratorMethod::FixedRk4;
    cfg.integrator.dt_us = *ov.fixed_step_us;
  }
  if (ov.out_dir) cfg.output.dir = *ov.out_dir;
  return cfg;
}

namespace {

json fit_json(const FitResult& f) {
  json params = json::object();
  for (const auto& p : f.params) params[p.name] = {{"value", p.value}, {"sigma", p.sigma}};
  return {{"model", f.model},
          {"params", params},
          {"residual_norm", f.residual_norm},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"flags", f.flags}};
}

json crossing_json(const AvoidedCrossing& c) {
  return {{"gap_mhz", c.gap_mhz},
          {"half_gap_mhz", c.half_gap_mhz},
          {"location", c.location},
          {"linewidth_mhz", c.linewidth_mhz},
          {"flagged", c.flagged},
          {"message", c.message},
          {"convention",
           "gap = minimum branch separation; for two degenerate transversely coupled qubits gap = 2 J, so J = gap / 2"}};
}

json resolved_json(const ExperimentConfig& cfg) {
  json r = json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TwoToneProtocol>) {
          r["drive_amplitude_mhz"] = cfg.drive_mhz(p.amplitude);
        } else if constexpr (std::is_same_v<T, PulsedSpectroscopyProtocol> || std::is_same_v<T, RabiAmplitudeProtocol>) {
          r["drive_amplitudes_mhz"] = cfg.drive_mhz(p.amplitudes);
        } else if constexpr (std::is_same_v<T, RabiLengthProtocol>) {
          r["drive_amplitude_mhz"] = cfg.drive_mhz(p.amplitude);
        } else if constexpr (std::is_same_v<T, ReadoutSwapProtocol>) {
          r["probe_epsilons_mhz"] = cfg.probe_mhz(p.epsilons);
          r["probe_coupling"] = cfg.calibration.probe_coupling;
        }
        if constexpr (requires { p.readout; }) {
          if (p.readout.enabled) {
            r["readout_epsilon_mhz"] = cfg.probe_mhz(p.readout.epsilon);
            r["probe_coupling"] = cfg.calibration.probe_coupling;
          }
        }
      },
      cfg.protocol);
  return r;
}

ReadoutSpec readout_spec(const ExperimentConfig& cfg, const ReadoutConfig& ro) {
  ReadoutSpec s;
  s.enabled = ro.enabled;
  s.epsilon_mhz = cfg.probe_mhz(ro.epsilon);
  s.duration_us = ro.duration_us;
  s.probe_coupling = cfg.calibration.probe_coupling;
  s.cutoff = ro.cutoff;
  return s;
}

Trajectory curve_trajectory(const DecayCurve& c, const std::string& name) {
  Trajectory t;
  t.times = c.delays_us;
  t.names = {name};
  t.series = {c.population};
  return t;
}

void run_decay(const ExperimentConfig& cfg, const DecayProtocol& p, bool ramsey, const RunOptions& run,
               RunResult& out) {
  const SystemSpec spec = cfg.system_spec();
  DecayConfig d;
  d.qubit = cfg.qubit_index(p.qubit);
  d.delays_us = p.delays_us.values();
  d.prep = p.preparation;
  d.prep_amplitude_mhz = p.prep_amplitude_mhz;
  d.detuning_mhz = ramsey ? p.detuning_mhz : 0.0;
  d.run = run;
  const DecayCurve c = ramsey ? ramsey_experiment(spec, d) : relaxation_experiment(spec, d);
  const std::string name = "p_" + p.qubit;
  out.trajectories.emplace_back(ramsey ? "ramsey" : "relaxation", curve_trajectory(c, name));
  out.resolved["carrier_ghz"] = c.carrier.in_ghz();
  if (p.preparation == Preparation::Pulse) out.resolved["pi_time_us"] = c.pi_time_us;

  json a = json::object();
  try {
    if (!ramsey) {
      const FitResult f = fit_exponential(c.delays_us, c.population);
      a["fit"] = fit_json(f);
      a["t1_us"] = f.value("tau");
    } else if (p.detuning_mhz == 0.0 && p.fit_frequencies == 1) {
      const FitResult f = fit_exponential(c.delays_us, c.population);
      a["fit"] = fit_json(f);
      a["t2_us"] = f.value("tau");
    } else {
      const FitResult f = p.fit_frequencies == 1 ? fit_damped_sinusoid(c.delays_us, c.population)
                                                 : fit_multi_frequency(c.delays_us, c.population, p.fit_frequencies);
      a["fit"] = fit_json(f);
      a["t2_us"] = f.value("tau");
    }
  } catch (const Error& e) {
    a["fit_error"] = e.what();
    out.warnings.push_back(std::string("fit failed: ") + e.what());
  }
  out.analysis = a;
}

SweepResult diagram_sweep(const EigenDiagram& d) {
  std::vector<double> branch_index;
  for (std::size_t b = 0; b < d.branches_ghz.size(); ++b) branch_index.push_back(static_cast<double>(b));
  SweepResult s({"gate_voltage", "mV", d.dv_mv}, {"branch", "index", branch_index}, {"branch_ghz", "bare_ghz"});
  for (std::size_t k = 0; k < d.dv_mv.size(); ++k) {
    for (std::size_t b = 0; b < branch_index.size(); ++b) {
      s.field("branch_ghz")[s.index(k, b)] = d.branches_ghz[b][k];
      s.field("bare_ghz")[s.index(k, b)] = d.bare_ghz[b][k];
    }
  }
  return s;
}

void run_eigen_diagram(const ExperimentConfig& cfg, const EigenDiagramProtocol& p, RunResult& out) {
  const GateVoltageModel gates = cfg.gate_voltage_model();
  const std::vector<CouplingSpec> couplings = cfg.system_spec().couplings;
  const std::vector<double> dv = p.dv_mv.values();
  out.sweep = diagram_sweep(eigen_diagram(gates, couplings, dv));

  json spots = json::array();
  for (std::size_t q = 0; q < gates.qubits.size(); ++q) {
    const double at = gates.qubits[q].delta_mv;
    const EigenDiagram local = eigen_diagram(gates, couplings, {at});
    const double bare = local.bare_ghz[q][0];
    double nearest = local.branches_ghz[0][0];
    for (const auto& b : local.branches_ghz) {
      if (std::abs(b[0] - bare) < std::abs(nearest - bare)) nearest = b[0];
    }
    spots.push_back({{"qubit", cfg.system.qubits[q].name},
                     {"sweet_spot_mv", at},
                     {"bare_ghz", bare},
                     {"branch_ghz", nearest},
                     {"shift_mhz", (nearest - bare) * 1e3}});
  }
  out.analysis["sweet_spots"] = spots;
  if (!p.pair_a.empty()) {
    const BranchPair pair = branch_pair(gates, couplings, dv, cfg.qubit_index(p.pair_a), cfg.qubit_index(p.pair_b));
    std::vector<double> lo, hi;
    for (std::size_t k = 0; k < dv.size(); ++k) {
      lo.push_back(pair.lower_ghz[k] * 1e3);
      hi.push_back(pair.upper_ghz[k] * 1e3);
    }
    json c = crossing_json(min_branch_separation(dv, lo, hi));
    c["pair"] = {p.pair_a, p.pair_b};
    out.analysis["pair_crossing"] = c;
  }
}

void collect_warnings(const Trajectory& t, const std::string& label, RunResult& out) {
  for (const auto& w : t.warnings) out.warnings.push_back(label + ": " + w);
}

}  // namespace

json plan_experiment(const ExperimentConfig& cfg) {
  return {{"name", cfg.name},
          {"protocol", std::string(protocol_name(cfg.protocol))},
          {"cells", cfg.cell_count()},
          {"spec_hash", spec_hash(cfg)},
          {"resolved", resolved_json(cfg)},
          {"threads", resolve_threads()}};
}

RunResult run_experiment(const ExperimentConfig& cfg, std::optional<std::size_t> threads) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  out.config = cfg;
  out.threads = resolve_threads(threads);
  out.resolved = resolved_json(cfg);
  RunOptions run = cfg.run_options();
  run.threads = out.threads;
  const SystemSpec spec = cfg.system_spec();

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TwoToneProtocol>) {
          TwoToneConfig c;
          c.dv_mv = p.dv_mv.values();
          c.drive_freqs_ghz = p.drive_freqs_ghz.values();
          c.drive_amplitude_mhz = cfg.drive_mhz(p.amplitude);
          c.duration_us = p.duration_us;
          c.average_fraction = p.average_fraction;
          c.average_samples = p.average_samples;
          c.run = run;
          out.sweep = two_tone_spectroscopy(spec, cfg.gate_voltage_model(), c);
          const std::string field = p.crossing_field.empty() ? "p_" + cfg.system.qubits[0].name : p.crossing_field;
          if (!out.sweep->has(field)) throw Error(ErrorKind::Config, "crossing_field '" + field + "' is not a sweep field");
          try {
            json c2 = crossing_json(extract_avoided_crossing(*out.sweep, field));
            c2["field"] = field;
            out.analysis["avoided_crossing"] = c2;
          } catch (const Error& e) {
            out.analysis["avoided_crossing_error"] = e.what();
          }
        } else if constexpr (std::is_same_v<T, PulsedSpectroscopyProtocol>) {
          PulsedSpectroscopyConfig c;
          c.drive_freqs_ghz = p.drive_freqs_ghz.values();
          c.amplitudes_mhz = cfg.drive_mhz(p.amplitudes);
          c.duration_us = p.duration_us;
          c.readout = readout_spec(cfg, p.readout);
          c.run = run;
          out.sweep = pulsed_spectroscopy(spec, c);
        } else if constexpr (std::is_same_v<T, RabiLengthProtocol>) {
          RabiLengthConfig c;
          c.drive_freqs_ghz = p.drive_freqs_ghz.values();
          c.lengths_us = p.lengths_us.values();
          c.amplitude_mhz = cfg.drive_mhz(p.amplitude);
          c.shape = p.shape;
          c.readout = readout_spec(cfg, p.readout);
          c.run = run;
          out.sweep = rabi_length_frequency(spec, c);
        } else if constexpr (std::is_same_v<T, RabiAmplitudeProtocol>) {
          RabiAmplitudeConfig c;
          c.drive_freqs_ghz = p.drive_freqs_ghz.values();
          c.amplitudes_mhz = cfg.drive_mhz(p.amplitudes);
          c.length_us = p.length_us;
          c.shape = p.shape;
          c.readout = readout_spec(cfg, p.readout);
          c.run = run;
          out.sweep = rabi_amplitude_frequency(spec, c);
        } else if constexpr (std::is_same_v<T, ReadoutSwapProtocol>) {
          ReadoutSwapConfig c;
          c.epsilons_mhz = cfg.probe_mhz(p.epsilons);
          c.duration_us = p.duration_us;
          c.probe_coupling = cfg.calibration.probe_coupling;
          c.cutoff = p.cutoff;
          c.samples = p.samples;
          c.excited.clear();
          for (const auto& e : p.excited) c.excited.push_back(cfg.qubit_index(e));
          c.qubit_a = cfg.qubit_index(p.qubit_a);
          c.qubit_b = cfg.qubit_index(p.qubit_b);
          c.run = run;
          const auto runs = readout_swap(spec, c);
          json summary = json::array();
          for (std::size_t k = 0; k < runs.size(); ++k) {
            const auto& r = runs[k];
            const std::string stem = "trajectory_eps" + std::to_string(k);
            summary.push_back({{"file_stem", stem},
                               {"epsilon_mhz", r.epsilon_mhz},
                               {"effective_epsilon_mhz", r.epsilon_mhz * c.probe_coupling},
                               {"crossed", r.crossed},
                               {"crossing_time_us", r.crossed ? json(r.crossing_time_us) : json(nullptr)},
                               {"n_bar_at_crossing", r.crossed ? json(r.n_bar_at_crossing) : json(nullptr)},
                               {"peak_n_bar", r.peak_n_bar},
                               {"final_n_bar", r.final_n_bar}});
            collect_warnings(r.trajectory, stem, out);
            out.trajectories.emplace_back(stem, r.trajectory);
          }
          out.analysis["readout_swap"] = summary;
        } else if constexpr (std::is_same_v<T, RelaxationProtocol>) {
          run_decay(cfg, p, false, run, out);
        } else if constexpr (std::is_same_v<T, RamseyProtocol>) {
          run_decay(cfg, p, true, run, out);
        } else if constexpr (std::is_same_v<T, EigenDiagramProtocol>) {
          run_eigen_diagram(cfg, p, out);
        }
      },
      cfg.protocol);

  if (out.sweep) {
    out.sweep->spec_hash = spec_hash(cfg);
    out.sweep->config_snapshot = serialize_config(cfg);
  }
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

json manifest_json(const RunResult& r, const std::vector<std::string>& files) {
  json failures = json::array();
  if (r.sweep) {
    for (std::size_t i = 0; i < r.sweep->size1(); ++i) {
      for (std::size_t j = 0; j < r.sweep->size2(); ++j) {
        const auto& e = r.sweep->cell_errors[r.sweep->index(i, j)];
        if (!e.empty()) {
          failures.push_back({{"axis1", r.sweep->axis1.values[i]}, {"axis2", r.sweep->axis2.values[j]}, {"error", e}});
        }
      }
    }
  }
  return {{"tool", "neoqed"},
          {"code_version", std::string(code_version())},
          {"schema_version", r.config.schema_version},
          {"name", r.config.name},
          {"protocol", std::string(protocol_name(r.config.protocol))},
          {"spec_hash", spec_hash(r.config)},
          {"seed", r.config.seed},
          {"config", serialize_config(r.config)},
          {"threads", r.threads},
          {"wall_time_s", r.wall_time_s},
          {"resolved", r.resolved},
          {"analysis", r.analysis},
          {"warnings", r.warnings},
          {"cell_failures", failures},
          {"status", failures.empty() ? "ok" : "partial"},
          {"outputs", files}};
}

std::vector<std::filesystem::path> write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  const std::string prefix = (r.config.output.prefix.empty() ? r.config.name : r.config.output.prefix) + "_";
  std::vector<std::filesystem::path> written;
  std::vector<std::string> names;
  auto put = [&](const std::string& name, const std::string& content) {
    write_file_atomic(dir / name, content);
    written.push_back(dir / name);
    names.push_back(name);
  };
  if (r.sweep) {
    const std::string csv = prefix + "sweep.csv";
    put(csv, sweep_csv(*r.sweep));
    put(prefix + "sweep.json", sweep_sidecar(*r.sweep, csv).dump(2) + "\n");
  }
  for (const auto& [stem, traj] : r.trajectories) put(prefix + stem + ".csv", trajectory_csv(traj));
  const std::string manifest = prefix + "manifest.json";
  names.push_back(manifest);
  write_file_atomic(dir / manifest, manifest_json(r, names).dump(2) + "\n");
  written.push_back(dir / manifest);
  return written;
}

}  // namespace neoqed
