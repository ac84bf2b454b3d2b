#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "neoqed/dynamics.hpp"
#include "neoqed/model.hpp"
#include "neoqed/sweep.hpp"

namespace neoqed {

/// Per-qubit hyperbolic gate-voltage dependence
/// f_i = sqrt(alpha_i^2 + (beta_i (dV - delta_i))^2).
struct GateVoltageModel {
  struct Qubit {
    double alpha_ghz = 0.0;
    double beta_ghz_per_mv = 0.0;
    double delta_mv = 0.0;
  };
  std::vector<Qubit> qubits;

  void validate() const;
  Frequency frequency(std::size_t qubit, double dv_mv) const;
  /// Copy of `spec` with every qubit frequency taken from the model at dv.
  SystemSpec apply(const SystemSpec& spec, double dv_mv) const;
};

/// Settings shared by every protocol. `integrator.t_end_us` and the sample
/// times are overwritten per run; tolerances, method and dt are honored.
struct RunOptions {
  IntegratorConfig integrator;
  FrameKind frame = FrameKind::Rotating;
  std::optional<std::size_t> threads;
};

/// Square resonator probe applied after a drive pulse. The probe strength
/// entering the Hamiltonian is probe_coupling * epsilon_mhz.
struct ReadoutSpec {
  bool enabled = false;
  double epsilon_mhz = 18.0;
  double duration_us = 0.7;
  double probe_coupling = 1.0;
  std::size_t cutoff = 60;
};

// ---------------------------------------------------------------------------
// Drive calibration helpers

/// Dressed |ground> -> |1_q> transition of the static Hamiltonian, resonator
/// in vacuum.
Frequency dressed_transition(const SystemSpec& spec, std::size_t qubit);

struct DriveResonance {
  Frequency carrier;
  double rabi_mhz = 0.0;  // population oscillation frequency on resonance
};

/// Carrier in [lo, hi] at which a square qubit drive of the given amplitude
/// resonantly couples the bare-labeled states `from` and `to` (RWA
/// quasi-energy anticrossing). Captures ac-Stark shifts of the drive itself.
DriveResonance find_drive_resonance(const SystemSpec& spec, double amplitude_mhz,
                                    const std::vector<std::size_t>& from,
                                    const std::vector<std::size_t>& to, Frequency lo, Frequency hi);

// ---------------------------------------------------------------------------
// Rabi-type sweeps. Fields per cell: "p_<qubit>" and "n_bar" at the end of the
// drive pulse; with readout enabled also "p_<qubit>_readout" and
// "n_bar_readout" at the end of the probe.

struct RabiLengthConfig {
  std::vector<double> drive_freqs_ghz;
  std::vector<double> lengths_us;
  double amplitude_mhz = 0.0;
  EnvelopeShape shape = EnvelopeShape::Gaussian;
  ReadoutSpec readout;
  RunOptions run;
};
/// axis1 = drive_freq [GHz], axis2 = pulse_length [us].
SweepResult rabi_length_frequency(const SystemSpec& spec, const RabiLengthConfig& cfg);

struct RabiAmplitudeConfig {
  std::vector<double> drive_freqs_ghz;
  std::vector<double> amplitudes_mhz;
  double length_us = 0.8;
  EnvelopeShape shape = EnvelopeShape::Gaussian;
  ReadoutSpec readout;
  RunOptions run;
};
/// axis1 = drive_freq [GHz], axis2 = drive_amplitude [MHz].
SweepResult rabi_amplitude_frequency(const SystemSpec& spec, const RabiAmplitudeConfig& cfg);

struct PulsedSpectroscopyConfig {
  std::vector<double> drive_freqs_ghz;
  std::vector<double> amplitudes_mhz;
  double duration_us = 10.0;
  ReadoutSpec readout;
  RunOptions run;
};
/// Long square pulse per cell. axis1 = drive_freq [GHz], axis2 = drive_amplitude [MHz].
SweepResult pulsed_spectroscopy(const SystemSpec& spec, const PulsedSpectroscopyConfig& cfg);

// ---------------------------------------------------------------------------
// Readout-induced swap

struct ReadoutSwapConfig {
  std::vector<double> epsilons_mhz;
  double duration_us = 0.7;
  double probe_coupling = 1.0;
  std::size_t cutoff = 60;
  std::size_t samples = 140;
  std::vector<std::size_t> excited{1};  // initially excited qubits
  std::size_t qubit_a = 0;               // pair whose populations are compared
  std::size_t qubit_b = 1;
  RunOptions run;
};

struct ReadoutSwapRun {
  double epsilon_mhz = 0.0;
  Trajectory trajectory;
  bool crossed = false;            // P_a - P_b changed sign
  double crossing_time_us = 0.0;   // first sign change, linear interpolation
  double n_bar_at_crossing = 0.0;
  double peak_n_bar = 0.0;
  double final_n_bar = 0.0;
};

std::vector<ReadoutSwapRun> readout_swap(const SystemSpec& spec, const ReadoutSwapConfig& cfg);

/// Probe coupling that puts the first population crossing of a single
/// readout at `target_crossing_us` (bracketing root search on the coupling).
double calibrate_probe_coupling(const SystemSpec& spec, double epsilon_mhz,
                                double target_crossing_us, ReadoutSwapConfig base,
                                double lo = 0.02, double hi = 0.5);

// ---------------------------------------------------------------------------
// Decoherence experiments

enum class Preparation {
  Pulse,  // resonant square pulse (through the bright qubit when eta_q = 0)
  Ideal,  // instantaneous rotation of the bare qubit
};

struct DecayConfig {
  std::size_t qubit = 0;
  std::vector<double> delays_us;
  Preparation prep = Preparation::Pulse;
  double prep_amplitude_mhz = 0.0;  // 0 = 2 MHz direct, 4 MHz cross-resonant
  double detuning_mhz = 0.0;        // Ramsey: virtual detuning of the second pulse
  RunOptions run;
};

struct DecayCurve {
  std::vector<double> delays_us;
  std::vector<double> population;  // excited population of the target qubit
  Frequency carrier;               // drive / frame frequency
  double pi_time_us = 0.0;         // 0 for ideal preparation
};

DecayCurve relaxation_experiment(const SystemSpec& spec, const DecayConfig& cfg);
DecayCurve ramsey_experiment(const SystemSpec& spec, const DecayConfig& cfg);

// ---------------------------------------------------------------------------
// Spectroscopy against gate voltage

struct TwoToneConfig {
  std::vector<double> dv_mv;
  std::vector<double> drive_freqs_ghz;
  double drive_amplitude_mhz = 0.4;
  double duration_us = 10.0;
  double average_fraction = 0.2;  // trailing window averaged per cell
  std::size_t average_samples = 21;
  RunOptions run;
};

/// Weak long drive per (dV, f) cell; fields "p_<qubit>", "n_bar" averaged over
/// the trailing window and "phase_proxy" = 2 chi <sigma_z> / kappa of the
/// first resonator-coupled qubit. axis1 = gate_voltage [mV], axis2 = drive_freq [GHz].
SweepResult two_tone_spectroscopy(const SystemSpec& spec, const GateVoltageModel& gates,
                                  const TwoToneConfig& cfg);

struct EigenDiagram {
  std::vector<double> dv_mv;
  std::vector<std::vector<double>> branches_ghz;  // [branch][dv], ascending per dv
  std::vector<std::vector<double>> bare_ghz;      // [qubit][dv]
};

/// One-excitation eigenfrequencies of N transversely coupled qubits
/// (resonator excluded).
EigenDiagram eigen_diagram(const GateVoltageModel& gates, const std::vector<CouplingSpec>& couplings,
                           const std::vector<double>& dv_mv);

/// The two one-excitation branches carrying the most weight on qubits a and
/// b at each dV (GHz, lower <= upper). Follows the pair through crossings
/// with other qubits where sorted branch indices would swap partners.
struct BranchPair {
  std::vector<double> lower_ghz;
  std::vector<double> upper_ghz;
};
BranchPair branch_pair(const GateVoltageModel& gates, const std::vector<CouplingSpec>& couplings,
                       const std::vector<double>& dv_mv, std::size_t a, std::size_t b);

}  // namespace neoqed
