#include "neoqed/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "neoqed/analysis.hpp"
#include "neoqed/error.hpp"

namespace neoqed {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Config, what);
}

void require_grid(const std::vector<double>& v, const std::string& name) {
  require(!v.empty(), name + " grid is empty");
  for (double x : v) require(std::isfinite(x), name + " grid contains a non-finite value");
}

std::vector<std::size_t> ground_digits(const SystemSpec& spec) {
  return std::vector<std::size_t>(spec.qubits.size() + 1, 0);
}

std::vector<std::size_t> excited_digits(const SystemSpec& spec, std::size_t q) {
  auto d = ground_digits(spec);
  d[qubit_slot(q)] = 1;
  return d;
}

DriveSpec qubit_drive(Frequency carrier, PulseEnvelope env, double phase = 0.0) {
  DriveSpec d;
  d.target = DriveTarget::Qubits;
  d.envelope = env;
  d.carrier = carrier;
  d.phase = phase;
  return d;
}

PulseEnvelope make_envelope(EnvelopeShape shape, double amplitude, double length) {
  return shape == EnvelopeShape::Gaussian ? PulseEnvelope::gaussian(amplitude, length)
                                          : PulseEnvelope::square(amplitude, length);
}

Frame drive_frame(Frequency carrier, const RunOptions& run) {
  return run.frame == FrameKind::Lab ? Frame::lab() : Frame::rotating(carrier);
}

Trajectory run_hamiltonian(const SystemSpec& spec, const TimeDependentHamiltonian& h,
                           const DensityMatrix& rho0, double t_end,
                           std::vector<double> samples, const RunOptions& run, bool store) {
  IntegratorConfig cfg = run.integrator;
  cfg.t_end_us = t_end;
  cfg.sample_times_us = std::move(samples);
  cfg.store_states = store;
  return evolve(rho0, h, build_collapse_operators(spec), cfg, standard_observables(spec));
}

Trajectory run_drive(const SystemSpec& spec, const DriveSpec& drive, const Frame& frame,
                     const DensityMatrix& rho0, double t_end, std::vector<double> samples,
                     const RunOptions& run, bool store = false) {
  return run_hamiltonian(spec, build_time_dependent_hamiltonian(spec, {drive}, frame), rho0, t_end,
                         std::move(samples), run, store);
}

Trajectory run_free(const SystemSpec& spec, const Frame& frame, const DensityMatrix& rho0,
                    double t_end, std::vector<double> samples, const RunOptions& run, bool store) {
  TimeDependentHamiltonian h{build_hamiltonian_in(spec, frame), {}};
  return run_hamiltonian(spec, h, rho0, t_end, std::move(samples), run, store);
}

/// Observable values of a state, in standard_observables order.
std::vector<double> observe(const SystemSpec& spec, const DensityMatrix& rho) {
  std::vector<double> out;
  for (const auto& o : standard_observables(spec)) out.push_back(expectation(rho, o.op).real());
  return out;
}

// Field layout shared by every pulse-type sweep.
struct PulseFields {
  std::vector<std::string> names;
  std::size_t nq = 0;
  bool readout = false;

  PulseFields(const SystemSpec& spec, bool with_readout) : nq(spec.qubits.size()), readout(with_readout) {
    for (const auto& q : spec.qubits) names.push_back("p_" + q.name);
    names.push_back("n_bar");
    if (readout) {
      for (const auto& q : spec.qubits) names.push_back("p_" + q.name + "_readout");
      names.push_back("n_bar_readout");
    }
  }

  // values: p per qubit then n_bar (the head of standard_observables).
  void store(SweepResult& s, std::size_t cell, const std::vector<double>& pre,
             const std::vector<double>* post) const {
    for (std::size_t k = 0; k <= nq; ++k) s.fields[k][cell] = pre[k];
    if (post) {
      for (std::size_t k = 0; k <= nq; ++k) s.fields[nq + 1 + k][cell] = (*post)[k];
    }
  }
};

std::vector<double> sample_values(const Trajectory& traj, std::size_t sample, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t k = 0; k < count; ++k) v[k] = traj.series[k][sample];
  return v;
}

/// Probe the resonator after a drive; returns p per qubit and n_bar.
std::vector<double> run_readout(const SystemSpec& spec, const DensityMatrix& rho, const Frame& from,
                                double t, const ReadoutSpec& ro, const RunOptions& run) {
  require(ro.duration_us > 0, "readout duration must be positive");
  require(ro.cutoff >= 2, "readout cutoff must be at least 2");
  const SystemSpec big = spec.with_cutoff(ro.cutoff);
  const Frame res = Frame::rotating(spec.resonator.omega);
  const DensityMatrix r = resize_cutoff(change_frame(rho, spec, from, res, t), ro.cutoff);
  DriveSpec probe;
  probe.target = DriveTarget::ResonatorProbe;
  probe.envelope = PulseEnvelope::square(ro.probe_coupling * ro.epsilon_mhz, ro.duration_us);
  probe.carrier = spec.resonator.omega;
  const Trajectory traj = run_drive(big, probe, res, r, ro.duration_us, {ro.duration_us}, run);
  return sample_values(traj, 0, spec.qubits.size() + 1);
}

/// Pulse of the given shape from the ground state; fills one cell.
void pulse_cell(const SystemSpec& spec, double f_ghz, double amplitude, double length,
                EnvelopeShape shape, const ReadoutSpec& ro, const RunOptions& run,
                const PulseFields& pf, SweepResult& s, std::size_t cell) {
  const Frequency carrier = Frequency::ghz(f_ghz);
  const Frame frame = drive_frame(carrier, run);
  DensityMatrix rho = product_state(spec);
  std::vector<double> pre;
  double t = 0.0;
  if (length <= 0.0) {
    pre = observe(spec, rho);
  } else {
    const Trajectory traj = run_drive(spec, qubit_drive(carrier, make_envelope(shape, amplitude, length)),
                                      frame, rho, length, {length}, run);
    pre = sample_values(traj, 0, pf.nq + 1);
    rho = traj.final_state;
    t = length;
  }
  if (ro.enabled) {
    const auto post = run_readout(spec, rho, frame, t, ro, run);
    pf.store(s, cell, pre, &post);
  } else {
    pf.store(s, cell, pre, nullptr);
  }
}

void merge_errors(SweepResult& s, const std::vector<std::string>& errors) {
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) s.cell_errors[k] = errors[k];
  }
}

std::vector<double> sorted_unique_positive(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v)
    if (x > 0) out.push_back(x);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Exact single-qubit rotation exp(-i theta/2 (cos phi X + sin phi Y)) on the bare qubit.
DensityMatrix rotate_qubit(const SystemSpec& spec, const DensityMatrix& rho, std::size_t q,
                           double theta, double phi) {
  const HilbertSpace space = spec.space();
  const Operator sp = embed(pauli(PauliKind::Plus), qubit_slot(q), space);
  const Operator axis = std::polar(1.0, -phi) * sp + std::polar(1.0, phi) * sp.adjoint();
  const Matrix u = std::cos(0.5 * theta) * Matrix::Identity(rho.dim(), rho.dim()) -
                   Complex(0.0, std::sin(0.5 * theta)) * axis.matrix();
  return DensityMatrix(space, u * rho.matrix() * u.adjoint());
}

struct PulsePlan {
  Frequency carrier;
  double amplitude = 0.0;
  double pi_time = 0.0;
};

PulsePlan plan_pulse(const SystemSpec& spec, std::size_t q, double requested) {
  const bool direct = spec.qubits[q].eta != 0.0;
  PulsePlan p;
  p.amplitude = requested > 0 ? requested : (direct ? 2.0 : 4.0);
  const Frequency f0 = dressed_transition(spec, q);
  // Narrow window: drive-induced shifts are well below the qubit spacing.
  const Frequency w = Frequency::mhz(3.0);
  const DriveResonance res =
      find_drive_resonance(spec, p.amplitude, ground_digits(spec), excited_digits(spec, q), f0 - w, f0 + w);
  require(res.rabi_mhz > 0, "qubit " + spec.qubits[q].name + " cannot be driven (no drive path)");
  p.carrier = res.carrier;
  p.pi_time = 0.5 / res.rabi_mhz;
  return p;
}

void check_decay_config(const SystemSpec& spec, const DecayConfig& cfg) {
  require(cfg.qubit < spec.qubits.size(), "decay experiment qubit index out of range");
  require_grid(cfg.delays_us, "delay");
  for (double d : cfg.delays_us) require(d >= 0, "delays must be non-negative");
}

}  // namespace

// ---------------------------------------------------------------------------
// GateVoltageModel

void GateVoltageModel::validate() const {
  std::vector<std::string> errs;
  for (std::size_t q = 0; q < qubits.size(); ++q) {
    const std::string p = "gate_model[" + std::to_string(q) + "].";
    if (!(qubits[q].alpha_ghz > 0)) errs.push_back(p + "alpha_ghz must be > 0");
    if (!(qubits[q].beta_ghz_per_mv >= 0)) errs.push_back(p + "beta_ghz_per_mv must be >= 0");
    if (!std::isfinite(qubits[q].delta_mv)) errs.push_back(p + "delta_mv must be finite");
  }
  if (!errs.empty()) {
    std::string msg = "invalid gate model:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw Error(ErrorKind::InvalidSpec, msg);
  }
}

Frequency GateVoltageModel::frequency(std::size_t qubit, double dv_mv) const {
  if (qubit >= qubits.size()) {
    throw Error(ErrorKind::InvalidSpec, "gate model has no qubit " + std::to_string(qubit));
  }
  const Qubit& q = qubits[qubit];
  const double x = q.beta_ghz_per_mv * (dv_mv - q.delta_mv);
  return Frequency::ghz(std::sqrt(q.alpha_ghz * q.alpha_ghz + x * x));
}

SystemSpec GateVoltageModel::apply(const SystemSpec& spec, double dv_mv) const {
  if (qubits.size() != spec.qubits.size()) {
    throw Error(ErrorKind::InvalidSpec, "gate model has " + std::to_string(qubits.size()) +
                                            " qubits, system has " + std::to_string(spec.qubits.size()));
  }
  SystemSpec out = spec;
  for (std::size_t q = 0; q < qubits.size(); ++q) out.qubits[q].omega = frequency(q, dv_mv);
  return out;
}

// ---------------------------------------------------------------------------
// Drive calibration

Frequency dressed_transition(const SystemSpec& spec, std::size_t qubit) {
  if (qubit >= spec.qubits.size()) throw Error(ErrorKind::InvalidSpec, "qubit index out of range");
  const DressedSpectrum ds = dressed_spectrum(spec);
  return Frequency::mhz(ds.transition(ground_digits(spec), excited_digits(spec, qubit)));
}

DriveResonance find_drive_resonance(const SystemSpec& spec, double amplitude_mhz,
                                    const std::vector<std::size_t>& from,
                                    const std::vector<std::size_t>& to, Frequency lo, Frequency hi) {
  if (!(hi > lo)) throw Error(ErrorKind::Config, "resonance search window is empty");
  const HilbertSpace space = spec.space();
  const std::size_t i_from = space.index_of(from);
  const std::size_t i_to = space.index_of(to);
  // Splitting of the two quasi-levels carrying most of |from> and |to>.
  auto splitting = [&](double f_mhz) {
    const Frequency f = Frequency::mhz(f_mhz);
    const Frame frame = Frame::rotating(f);
    const DriveSpec d = qubit_drive(f, PulseEnvelope::square(amplitude_mhz, 1.0));
    const Operator h = build_hamiltonian_in(spec, frame) + build_drive_term(spec, d, 0.0, frame);
    const EigenSystem es = eigensystem_hermitian(h);
    std::size_t best = 0, second = 0;
    double wb = -1, ws = -1;
    for (std::size_t k = 0; k < es.values.size(); ++k) {
      const auto col = es.vectors.col(static_cast<Eigen::Index>(k));
      const double w = std::norm(col(static_cast<Eigen::Index>(i_from))) +
                       std::norm(col(static_cast<Eigen::Index>(i_to)));
      if (w > wb) {
        second = best;
        ws = wb;
        best = k;
        wb = w;
      } else if (w > ws) {
        second = k;
        ws = w;
      }
    }
    return std::abs(es.values[best] - es.values[second]) / kTwoPi;
  };
  const int n = 200;
  const double a = lo.in_mhz(), b = hi.in_mhz();
  int kmin = 0;
  double vmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    const double v = splitting(a + (b - a) * k / n);
    if (v < vmin) {
      vmin = v;
      kmin = k;
    }
  }
  // Golden-section refinement around the grid minimum.
  double x0 = a + (b - a) * std::max(kmin - 1, 0) / n;
  double x3 = a + (b - a) * std::min(kmin + 1, n) / n;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = x3 - gr * (x3 - x0), x2 = x0 + gr * (x3 - x0);
  double f1 = splitting(x1), f2 = splitting(x2);
  for (int it = 0; it < 60 && x3 - x0 > 1e-9; ++it) {
    if (f1 < f2) {
      x3 = x2;
      x2 = x1;
      f2 = f1;
      x1 = x3 - gr * (x3 - x0);
      f1 = splitting(x1);
    } else {
      x0 = x1;
      x1 = x2;
      f1 = f2;
      x2 = x0 + gr * (x3 - x0);
      f2 = splitting(x2);
    }
  }
  const double xm = 0.5 * (x0 + x3);
  return {Frequency::mhz(xm), splitting(xm)};
}

// ---------------------------------------------------------------------------
// Rabi-type sweeps

SweepResult rabi_length_frequency(const SystemSpec& spec, const RabiLengthConfig& cfg) {
  spec.validate();
  require_grid(cfg.drive_freqs_ghz, "drive frequency");
  require_grid(cfg.lengths_us, "pulse length");
  for (double l : cfg.lengths_us) require(l >= 0, "pulse lengths must be non-negative");
  const PulseFields pf(spec, cfg.readout.enabled);
  SweepResult s({"drive_freq", "GHz", cfg.drive_freqs_ghz}, {"pulse_length", "us", cfg.lengths_us}, pf.names);
  const std::size_t threads = resolve_threads(cfg.run.threads);

  if (cfg.shape == EnvelopeShape::Square) {
    // A square pulse truncated at L is the same run sampled at L: one
    // trajectory per frequency column.
    const auto lengths = sorted_unique_positive(cfg.lengths_us);
    const auto errors = parallel_for(s.size1(), threads, [&](std::size_t i) {
      const Frequency carrier = Frequency::ghz(cfg.drive_freqs_ghz[i]);
      const Frame frame = drive_frame(carrier, cfg.run);
      const DensityMatrix rho0 = product_state(spec);
      Trajectory traj;
      if (!lengths.empty()) {
        traj = run_drive(spec, qubit_drive(carrier, PulseEnvelope::square(cfg.amplitude_mhz, lengths.back())),
                         frame, rho0, lengths.back(), lengths, cfg.run, cfg.readout.enabled);
      }
      for (std::size_t j = 0; j < s.size2(); ++j) {
        const double l = cfg.lengths_us[j];
        const std::size_t cell = s.index(i, j);
        if (l <= 0) {
          const auto pre = observe(spec, rho0);
          if (cfg.readout.enabled) {
            const auto post = run_readout(spec, rho0, frame, 0.0, cfg.readout, cfg.run);
            pf.store(s, cell, pre, &post);
          } else {
            pf.store(s, cell, pre, nullptr);
          }
          continue;
        }
        const auto k = static_cast<std::size_t>(std::lower_bound(lengths.begin(), lengths.end(), l) - lengths.begin());
        const auto pre = sample_values(traj, k, pf.nq + 1);
        if (cfg.readout.enabled) {
          const auto post = run_readout(spec, traj.states[k], frame, l, cfg.readout, cfg.run);
          pf.store(s, cell, pre, &post);
        } else {
          pf.store(s, cell, pre, nullptr);
        }
      }
    });
    for (std::size_t i = 0; i < s.size1(); ++i) {
      if (errors[i].empty()) continue;
      for (std::size_t j = 0; j < s.size2(); ++j) s.cell_errors[s.index(i, j)] = errors[i];
    }
    return s;
  }

  merge_errors(s, parallel_for(s.cells(), threads, [&](std::size_t cell) {
                 const std::size_t i = cell / s.size2(), j = cell % s.size2();
                 pulse_cell(spec, cfg.drive_freqs_ghz[i], cfg.amplitude_mhz, cfg.lengths_us[j], cfg.shape,
                            cfg.readout, cfg.run, pf, s, cell);
               }));
  return s;
}

SweepResult rabi_amplitude_frequency(const SystemSpec& spec, const RabiAmplitudeConfig& cfg) {
  spec.validate();
  require_grid(cfg.drive_freqs_ghz, "drive frequency");
  require_grid(cfg.amplitudes_mhz, "drive amplitude");
  require(cfg.length_us > 0, "pulse length must be positive");
  const PulseFields pf(spec, cfg.readout.enabled);
  SweepResult s({"drive_freq", "GHz", cfg.drive_freqs_ghz},
                {"drive_amplitude", "MHz", cfg.amplitudes_mhz}, pf.names);
  merge_errors(s, parallel_for(s.cells(), resolve_threads(cfg.run.threads), [&](std::size_t cell) {
                 const std::size_t i = cell / s.size2(), j = cell % s.size2();
                 pulse_cell(spec, cfg.drive_freqs_ghz[i], cfg.amplitudes_mhz[j], cfg.length_us, cfg.shape,
                            cfg.readout, cfg.run, pf, s, cell);
               }));
  return s;
}

SweepResult pulsed_spectroscopy(const SystemSpec& spec, const PulsedSpectroscopyConfig& cfg) {
  spec.validate();
  require_grid(cfg.drive_freqs_ghz, "drive frequency");
  require_grid(cfg.amplitudes_mhz, "drive amplitude");
  require(cfg.duration_us > 0, "drive duration must be positive");
  const PulseFields pf(spec, cfg.readout.enabled);
  SweepResult s({"drive_freq", "GHz", cfg.drive_freqs_ghz},
                {"drive_amplitude", "MHz", cfg.amplitudes_mhz}, pf.names);
  merge_errors(s, parallel_for(s.cells(), resolve_threads(cfg.run.threads), [&](std::size_t cell) {
                 const std::size_t i = cell / s.size2(), j = cell % s.size2();
                 pulse_cell(spec, cfg.drive_freqs_ghz[i], cfg.amplitudes_mhz[j], cfg.duration_us,
                            EnvelopeShape::Square, cfg.readout, cfg.run, pf, s, cell);
               }));
  return s;
}

// ---------------------------------------------------------------------------
// Readout swap

std::vector<ReadoutSwapRun> readout_swap(const SystemSpec& spec_in, const ReadoutSwapConfig& cfg) {
  require_grid(cfg.epsilons_mhz, "probe amplitude");
  require(cfg.duration_us > 0, "probe duration must be positive");
  require(cfg.samples >= 2, "readout swap needs at least 2 samples");
  const SystemSpec spec = spec_in.with_cutoff(cfg.cutoff);
  spec.validate();
  require(cfg.qubit_a < spec.qubits.size() && cfg.qubit_b < spec.qubits.size() && cfg.qubit_a != cfg.qubit_b,
          "readout swap compares two distinct qubits");
  for (std::size_t q : cfg.excited) require(q < spec.qubits.size(), "excited qubit index out of range");

  std::vector<ReadoutSwapRun> runs(cfg.epsilons_mhz.size());
  const auto errors = parallel_for(runs.size(), resolve_threads(cfg.run.threads), [&](std::size_t k) {
    ReadoutSwapRun& r = runs[k];
    r.epsilon_mhz = cfg.epsilons_mhz[k];
    DriveSpec probe;
    probe.target = DriveTarget::ResonatorProbe;
    probe.envelope = PulseEnvelope::square(cfg.probe_coupling * r.epsilon_mhz, cfg.duration_us);
    probe.carrier = spec.resonator.omega;
    r.trajectory = run_drive(spec, probe, Frame::rotating(spec.resonator.omega),
                             product_state(spec, cfg.excited), cfg.duration_us,
                             IntegratorConfig::uniform_samples(cfg.duration_us, cfg.samples), cfg.run);
    const auto& t = r.trajectory.times;
    const auto& pa = r.trajectory.get("p_" + spec.qubits[cfg.qubit_a].name);
    const auto& pb = r.trajectory.get("p_" + spec.qubits[cfg.qubit_b].name);
    const auto& n = r.trajectory.get("n_bar");
    r.peak_n_bar = *std::max_element(n.begin(), n.end());
    r.final_n_bar = n.back();
    for (std::size_t s = 1; s < t.size(); ++s) {
      const double d0 = pa[s - 1] - pb[s - 1], d1 = pa[s] - pb[s];
      if (d0 == 0.0 || (d0 < 0) == (d1 < 0)) continue;
      const double w = d0 / (d0 - d1);
      r.crossed = true;
      r.crossing_time_us = t[s - 1] + w * (t[s] - t[s - 1]);
      r.n_bar_at_crossing = n[s - 1] + w * (n[s] - n[s - 1]);
      break;
    }
  });
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) {
      throw Error(ErrorKind::Integration, "readout at eps=" + std::to_string(cfg.epsilons_mhz[k]) +
                                              " MHz failed: " + errors[k]);
    }
  }
  return runs;
}

double calibrate_probe_coupling(const SystemSpec& spec, double epsilon_mhz, double target_crossing_us,
                                ReadoutSwapConfig base, double lo, double hi) {
  require(target_crossing_us > 0 && target_crossing_us < base.duration_us,
          "target crossing must lie inside the probe window");
  require(lo > 0 && hi > lo, "probe coupling bracket must satisfy 0 < lo < hi");
  base.epsilons_mhz = {epsilon_mhz};
  auto crossing = [&](double c) {
    base.probe_coupling = c;
    const auto r = readout_swap(spec, base).front();
    return r.crossed ? r.crossing_time_us : std::numeric_limits<double>::infinity();
  };
  // A stronger probe crosses earlier: bisect in log space.
  require(crossing(hi) < target_crossing_us, "upper probe coupling does not cross early enough");
  require(crossing(lo) > target_crossing_us, "lower probe coupling already crosses before the target");
  while (hi / lo > 1.0 + 1e-4) {
    const double mid = std::sqrt(lo * hi);
    (crossing(mid) > target_crossing_us ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

// ---------------------------------------------------------------------------
// Decoherence experiments

DecayCurve relaxation_experiment(const SystemSpec& spec, const DecayConfig& cfg) {
  spec.validate();
  check_decay_config(spec, cfg);
  DecayCurve curve;
  DensityMatrix rho = product_state(spec);
  if (cfg.prep == Preparation::Ideal) {
    curve.carrier = dressed_transition(spec, cfg.qubit);
    rho = rotate_qubit(spec, rho, cfg.qubit, M_PI, 0.0);
  } else {
    const PulsePlan plan = plan_pulse(spec, cfg.qubit, cfg.prep_amplitude_mhz);
    curve.carrier = plan.carrier;
    curve.pi_time_us = plan.pi_time;
    rho = run_drive(spec, qubit_drive(plan.carrier, PulseEnvelope::square(plan.amplitude, plan.pi_time)),
                    Frame::rotating(plan.carrier), rho, plan.pi_time, {plan.pi_time}, cfg.run)
              .final_state;
  }
  std::vector<double> samples = cfg.delays_us;
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  const double t_end = std::max(samples.back(), 1e-6);
  const Trajectory traj = run_free(spec, Frame::rotating(curve.carrier), rho, t_end, samples, cfg.run, false);
  const auto& p = traj.get("p_" + spec.qubits[cfg.qubit].name);
  curve.delays_us = cfg.delays_us;
  for (double d : cfg.delays_us) {
    const auto k = static_cast<std::size_t>(std::lower_bound(samples.begin(), samples.end(), d) - samples.begin());
    curve.population.push_back(p[k]);
  }
  return curve;
}

DecayCurve ramsey_experiment(const SystemSpec& spec, const DecayConfig& cfg) {
  spec.validate();
  check_decay_config(spec, cfg);
  DecayCurve curve;
  DensityMatrix rho = product_state(spec);
  PulsePlan plan;
  if (cfg.prep == Preparation::Ideal) {
    curve.carrier = dressed_transition(spec, cfg.qubit);
    rho = rotate_qubit(spec, rho, cfg.qubit, 0.5 * M_PI, 0.0);
  } else {
    plan = plan_pulse(spec, cfg.qubit, cfg.prep_amplitude_mhz);
    curve.carrier = plan.carrier;
    curve.pi_time_us = plan.pi_time;
    const double half = 0.5 * plan.pi_time;
    rho = run_drive(spec, qubit_drive(plan.carrier, PulseEnvelope::square(plan.amplitude, half)),
                    Frame::rotating(plan.carrier), rho, half, {half}, cfg.run)
              .final_state;
  }
  const Frame frame = Frame::rotating(curve.carrier);
  std::vector<double> samples = cfg.delays_us;
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  const Trajectory free = run_free(spec, frame, rho, std::max(samples.back(), 1e-6), samples, cfg.run, true);

  const std::string name = "p_" + spec.qubits[cfg.qubit].name;
  const Operator pop = qubit_population(spec, cfg.qubit);
  std::vector<double> per_sample(samples.size());
  const auto errors = parallel_for(samples.size(), resolve_threads(cfg.run.threads), [&](std::size_t k) {
    // Virtual detuning: the second pulse axis advances by 2 pi delta tau.
    const double phi = kTwoPi * cfg.detuning_mhz * samples[k];
    if (cfg.prep == Preparation::Ideal) {
      per_sample[k] = expectation(rotate_qubit(spec, free.states[k], cfg.qubit, 0.5 * M_PI, phi), pop).real();
      return;
    }
    const double half = 0.5 * plan.pi_time;
    const Trajectory second =
        run_drive(spec, qubit_drive(plan.carrier, PulseEnvelope::square(plan.amplitude, half), phi), frame,
                  free.states[k], half, {half}, cfg.run);
    per_sample[k] = second.get(name).back();
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorKind::Integration, "Ramsey readout pulse failed: " + e);
  }
  curve.delays_us = cfg.delays_us;
  for (double d : cfg.delays_us) {
    const auto k = static_cast<std::size_t>(std::lower_bound(samples.begin(), samples.end(), d) - samples.begin());
    curve.population.push_back(per_sample[k]);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Spectroscopy against gate voltage

SweepResult two_tone_spectroscopy(const SystemSpec& spec, const GateVoltageModel& gates,
                                  const TwoToneConfig& cfg) {
  spec.validate();
  gates.validate();
  require_grid(cfg.dv_mv, "gate voltage");
  require_grid(cfg.drive_freqs_ghz, "drive frequency");
  require(cfg.duration_us > 0, "drive duration must be positive");
  require(cfg.average_fraction > 0 && cfg.average_fraction <= 1, "average_fraction must be in (0, 1]");
  require(cfg.average_samples >= 1, "average_samples must be positive");
  (void)gates.apply(spec, 0.0);  // qubit count check

  std::optional<std::size_t> bright;
  for (std::size_t q = 0; q < spec.qubits.size() && !bright; ++q)
    if (spec.qubits[q].g.in_mhz() != 0.0) bright = q;
  const bool proxy = bright && spec.resonator.kappa.in_mhz() > 0;

  std::vector<std::string> names;
  for (const auto& q : spec.qubits) names.push_back("p_" + q.name);
  names.push_back("n_bar");
  if (proxy) names.push_back("phase_proxy");
  SweepResult s({"gate_voltage", "mV", cfg.dv_mv}, {"drive_freq", "GHz", cfg.drive_freqs_ghz}, names);

  const double t0 = cfg.duration_us * (1.0 - cfg.average_fraction);
  std::vector<double> samples;
  for (std::size_t k = 0; k < cfg.average_samples; ++k) {
    samples.push_back(cfg.average_samples == 1
                          ? cfg.duration_us
                          : t0 + (cfg.duration_us - t0) * static_cast<double>(k) / (cfg.average_samples - 1));
  }
  const std::size_t nq = spec.qubits.size();
  merge_errors(s, parallel_for(s.cells(), resolve_threads(cfg.run.threads), [&](std::size_t cell) {
                 const std::size_t i = cell / s.size2(), j = cell % s.size2();
                 const SystemSpec local = gates.apply(spec, cfg.dv_mv[i]);
                 const Frequency carrier = Frequency::ghz(cfg.drive_freqs_ghz[j]);
                 const Trajectory traj = run_drive(
                     local, qubit_drive(carrier, PulseEnvelope::square(cfg.drive_amplitude_mhz, cfg.duration_us)),
                     drive_frame(carrier, cfg.run), product_state(local), cfg.duration_us, samples, cfg.run);
                 for (std::size_t k = 0; k <= nq; ++k) {
                   const auto& v = traj.series[k];
                   s.fields[k][cell] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                 }
                 if (proxy) {
                   const QubitSpec& b = local.qubits[*bright];
                   const double chi = oracle_dispersive_shift(b.g.in_mhz(), (b.omega - local.resonator.omega).in_mhz());
                   const double sz = 2.0 * s.fields[*bright][cell] - 1.0;
                   s.fields[nq + 1][cell] = 2.0 * chi * sz / local.resonator.kappa.in_mhz();
                 }
               }));
  return s;
}

namespace {

Eigen::MatrixXd one_excitation_matrix(const GateVoltageModel& gates, const std::vector<CouplingSpec>& couplings,
                                      double dv) {
  const auto n = static_cast<Eigen::Index>(gates.qubits.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index q = 0; q < n; ++q) h(q, q) = gates.frequency(static_cast<std::size_t>(q), dv).in_ghz();
  for (const auto& c : couplings) {
    const auto i = static_cast<Eigen::Index>(c.i), j = static_cast<Eigen::Index>(c.j);
    h(i, j) += c.strength.in_ghz();
    h(j, i) += c.strength.in_ghz();
  }
  return h;
}

void check_diagram_inputs(const GateVoltageModel& gates, const std::vector<CouplingSpec>& couplings) {
  gates.validate();
  const std::size_t n = gates.qubits.size();
  if (n == 0) throw Error(ErrorKind::InvalidSpec, "gate model has no qubits");
  for (const auto& c : couplings) {
    if (c.i >= n || c.j >= n || c.i == c.j) {
      throw Error(ErrorKind::InvalidSpec, "coupling references a missing qubit");
    }
  }
}

}  // namespace

EigenDiagram eigen_diagram(const GateVoltageModel& gates, const std::vector<CouplingSpec>& couplings,
                           const std::vector<double>& dv_mv) {
  check_diagram_inputs(gates, couplings);
  const std::size_t n = gates.qubits.size();
  EigenDiagram d;
  d.dv_mv = dv_mv;
  d.branches_ghz.assign(n, std::vector<double>(dv_mv.size()));
  d.bare_ghz.assign(n, std::vector<double>(dv_mv.size()));
  for (std::size_t k = 0; k < dv_mv.size(); ++k) {
    const Eigen::MatrixXd h = one_excitation_matrix(gates, couplings, dv_mv[k]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    for (std::size_t q = 0; q < n; ++q) {
      d.bare_ghz[q][k] = h(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
      d.branches_ghz[q][k] = es.eigenvalues()(static_cast<Eigen::Index>(q));
    }
  }
  return d;
}

BranchPair branch_pair(const GateVoltageModel& gates, const std::vector<CouplingSpec>& couplings,
                       const std::vector<double>& dv_mv, std::size_t a, std::size_t b) {
  check_diagram_inputs(gates, couplings);
  if (a >= gates.qubits.size() || b >= gates.qubits.size() || a == b) {
    throw Error(ErrorKind::InvalidSpec, "branch pair needs two distinct existing qubits");
  }
  BranchPair out;
  for (double dv : dv_mv) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(one_excitation_matrix(gates, couplings, dv));
    const Eigen::MatrixXd& v = es.eigenvectors();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.cols()));
    std::iota(order.begin(), order.end(), 0);
    const auto weight = [&](Eigen::Index c) {
      return v(static_cast<Eigen::Index>(a), c) * v(static_cast<Eigen::Index>(a), c) +
             v(static_cast<Eigen::Index>(b), c) * v(static_cast<Eigen::Index>(b), c);
    };
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return weight(x) > weight(y); });
    const double e0 = es.eigenvalues()(order[0]), e1 = es.eigenvalues()(order[1]);
    out.lower_ghz.push_back(std::min(e0, e1));
    out.upper_ghz.push_back(std::max(e0, e1));
  }
  return out;
}

}  // namespace neoqed
