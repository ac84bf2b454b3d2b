#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "neoqed/error.hpp"
#include "neoqed/model.hpp"
#include "neoqed/protocols.hpp"

namespace neoqed {

inline constexpr int kSchemaVersion = 1;

/// A grid given either as an explicit list or as {start, stop, count}
/// (inclusive, uniformly spaced). The written form is kept so configs
/// round-trip unchanged.
struct Grid {
  std::vector<double> list;
  bool is_range = false;
  double start = 0.0;
  double stop = 0.0;
  std::size_t count = 0;

  static Grid of(std::vector<double> values);
  static Grid range(double start, double stop, std::size_t count);
  std::vector<double> values() const;
  std::size_t size() const { return is_range ? count : list.size(); }
  bool operator==(const Grid&) const = default;
};

/// Units accepted for drive and probe strengths. Drive volts are converted
/// with calibration.amplitude_scale (angular, rad/us per volt); dBm values
/// go through the calibration reference points first.
enum class PowerUnit { Mhz, Volt, Dbm };

struct Power {
  PowerUnit unit = PowerUnit::Mhz;
  double value = 0.0;
  bool operator==(const Power&) const = default;
};

struct PowerGrid {
  PowerUnit unit = PowerUnit::Mhz;
  Grid grid;
  bool operator==(const PowerGrid&) const = default;
};

struct ResonatorConfig {
  double omega_ghz = 0.0;
  double kappa_mhz = 0.0;
  std::size_t cutoff = 30;
  bool operator==(const ResonatorConfig&) const = default;
};

struct QubitConfig {
  std::string name;
  double omega_ghz = 0.0;
  double g_mhz = 0.0;
  double gamma1_mhz = 0.0;
  double gamma_phi_mhz = 0.0;
  double eta = 0.0;
  bool operator==(const QubitConfig&) const = default;
};

struct CouplingConfig {
  std::string a;
  std::string b;
  double j_mhz = 0.0;
  bool operator==(const CouplingConfig&) const = default;
};

struct SystemConfig {
  ResonatorConfig resonator;
  std::vector<QubitConfig> qubits;
  std::vector<CouplingConfig> couplings;
  bool operator==(const SystemConfig&) const = default;
};

struct GateQubitConfig {
  std::string qubit;
  double alpha_ghz = 0.0;
  double beta_ghz_per_mv = 0.0;
  double delta_mv = 0.0;
  bool operator==(const GateQubitConfig&) const = default;
};

struct CalibrationConfig {
  double amplitude_scale = 735.0;    // rad/us of Rabi frequency per output volt
  double drive_ref_dbm = -57.0;      // drive power that produces drive_ref_v
  double drive_ref_v = 0.25;
  double probe_ref_dbm = -120.0;     // probe power that produces probe_ref_mhz
  double probe_ref_mhz = 18.0;
  double probe_coupling = 1.0;       // epsilon_eff = probe_coupling * epsilon
  bool operator==(const CalibrationConfig&) const = default;
};

struct ReadoutConfig {
  bool enabled = false;
  Power epsilon{PowerUnit::Mhz, 18.0};
  double duration_us = 0.7;
  std::size_t cutoff = 60;
  bool operator==(const ReadoutConfig&) const = default;
};

struct TwoToneProtocol {
  Grid dv_mv;
  Grid drive_freqs_ghz;
  Power amplitude{PowerUnit::Mhz, 0.4};
  double duration_us = 10.0;
  double average_fraction = 0.2;
  std::size_t average_samples = 21;
  std::string crossing_field;  // field used for the avoided-crossing report ("" = first qubit)
  bool operator==(const TwoToneProtocol&) const = default;
};

struct PulsedSpectroscopyProtocol {
  Grid drive_freqs_ghz;
  PowerGrid amplitudes;
  double duration_us = 10.0;
  ReadoutConfig readout;
  bool operator==(const PulsedSpectroscopyProtocol&) const = default;
};

struct RabiLengthProtocol {
  Grid drive_freqs_ghz;
  Grid lengths_us;
  Power amplitude;
  EnvelopeShape shape = EnvelopeShape::Gaussian;
  ReadoutConfig readout;
  bool operator==(const RabiLengthProtocol&) const = default;
};

struct RabiAmplitudeProtocol {
  Grid drive_freqs_ghz;
  PowerGrid amplitudes;
  double length_us = 0.8;
  EnvelopeShape shape = EnvelopeShape::Gaussian;
  ReadoutConfig readout;
  bool operator==(const RabiAmplitudeProtocol&) const = default;
};

struct ReadoutSwapProtocol {
  PowerGrid epsilons;
  double duration_us = 0.7;
  std::size_t cutoff = 60;
  std::size_t samples = 140;
  std::vector<std::string> excited;
  std::string qubit_a;
  std::string qubit_b;
  bool operator==(const ReadoutSwapProtocol&) const = default;
};

struct DecayProtocol {
  std::string qubit;
  Grid delays_us;
  Preparation preparation = Preparation::Pulse;
  double prep_amplitude_mhz = 0.0;  // 0 = protocol default
  double detuning_mhz = 0.0;        // Ramsey only
  std::size_t fit_frequencies = 1;  // Ramsey only: damped cosines in the fit
  bool operator==(const DecayProtocol&) const = default;
};

struct RelaxationProtocol : DecayProtocol {
  bool operator==(const RelaxationProtocol&) const = default;
};
struct RamseyProtocol : DecayProtocol {
  bool operator==(const RamseyProtocol&) const = default;
};

struct EigenDiagramProtocol {
  Grid dv_mv;
  std::string pair_a;  // branches whose minimum separation is reported
  std::string pair_b;
  bool operator==(const EigenDiagramProtocol&) const = default;
};

using ProtocolConfig =
    std::variant<TwoToneProtocol, PulsedSpectroscopyProtocol, RabiLengthProtocol, RabiAmplitudeProtocol,
                 ReadoutSwapProtocol, RelaxationProtocol, RamseyProtocol, EigenDiagramProtocol>;

/// "two-tone", "rabi-length", ...
std::string_view protocol_name(const ProtocolConfig& p);
std::vector<std::string> protocol_names();

struct IntegratorSettings {
  IntegratorMethod method = IntegratorMethod::AdaptiveDopri5;
  double dt_us = 1e-3;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step_us = 0.0;
  FrameKind frame = FrameKind::Rotating;
  bool operator==(const IntegratorSettings&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string prefix;  // "" = config name
  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  std::uint64_t seed = 0;
  SystemConfig system;
  std::vector<GateQubitConfig> gate_model;
  CalibrationConfig calibration;
  ProtocolConfig protocol;
  IntegratorSettings integrator;
  OutputConfig output;
  bool operator==(const ExperimentConfig&) const = default;

  SystemSpec system_spec() const;
  /// Gate model ordered like system.qubits.
  GateVoltageModel gate_voltage_model() const;
  std::size_t qubit_index(const std::string& name) const;
  RunOptions run_options() const;

  /// Drive Rabi frequency in cyclic MHz.
  double drive_mhz(const Power& p) const;
  std::vector<double> drive_mhz(const PowerGrid& g) const;
  /// Probe strength in cyclic MHz before the probe coupling is applied.
  double probe_mhz(const Power& p) const;
  std::vector<double> probe_mhz(const PowerGrid& g) const;

  /// Number of simulation cells (or trajectories) the protocol will run.
  std::size_t cell_count() const;
};

struct ConfigIssue {
  std::string path;  // e.g. "system.qubits[1].gamma1_mhz"
  int line = -1;     // 1-based, -1 if unknown
  int column = -1;
  std::string message;
};

/// Thrown by parse_config; carries every problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Parses and validates a YAML experiment description. Throws ConfigError
/// listing all syntax and schema problems.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Canonical YAML; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a 64 over the canonical form of the physics-relevant sections
/// (system, gate_model, calibration, protocol, integrator), as 16 hex digits.
std::string spec_hash(const ExperimentConfig& cfg);

/// Shipped presets, embedded at build time.
std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);
ExperimentConfig load_preset(const std::string& name);

/// "preset:<name>" or a file path.
ExperimentConfig resolve_config(const std::string& ref);

}  // namespace neoqed
