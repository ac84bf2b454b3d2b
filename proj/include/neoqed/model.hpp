#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neoqed/operator.hpp"
#include "neoqed/units.hpp"

namespace neoqed {

struct QubitSpec {
  std::string name;
  Frequency omega;      // transition frequency
  Frequency g;          // resonator coupling
  Frequency gamma1;     // relaxation rate, T1 = 1/(2 pi gamma1)
  Frequency gamma_phi;  // pure dephasing rate, T_phi = 2/(2 pi gamma_phi)
  double eta = 0.0;     // direct-drive ratio
};

struct CouplingSpec {
  std::size_t i = 0;
  std::size_t j = 0;
  Frequency strength;  // transverse exchange J_ij
};

struct ResonatorSpec {
  Frequency omega;
  Frequency kappa;
  std::size_t cutoff = 30;
};

/// One resonator mode, N two-level qubits, exchange couplings and rates.
struct SystemSpec {
  ResonatorSpec resonator;
  std::vector<QubitSpec> qubits;
  std::vector<CouplingSpec> couplings;

  /// Throws Error(InvalidSpec) listing every violated invariant.
  void validate() const;
  HilbertSpace space() const;
  /// Copy with a different Fock cutoff.
  SystemSpec with_cutoff(std::size_t cutoff) const;
  std::size_t qubit_index(const std::string& name) const;
};

enum class EnvelopeShape { Square, Gaussian };

/// Real envelope on [0, duration]. Gaussians are truncated at +-2.5 sigma,
/// so duration == 5 sigma and the peak sits at duration/2.
struct PulseEnvelope {
  EnvelopeShape shape = EnvelopeShape::Square;
  double amplitude_mhz = 0.0;
  double duration_us = 0.0;
  double sigma_us = 0.0;

  static PulseEnvelope square(double amplitude_mhz, double duration_us);
  static PulseEnvelope gaussian(double amplitude_mhz, double duration_us);

  /// Zero outside [0, duration].
  double value(double t_us) const;
  void validate() const;
};

enum class DriveTarget { Qubits, ResonatorProbe };

struct DriveSpec {
  DriveTarget target = DriveTarget::Qubits;
  PulseEnvelope envelope;
  Frequency carrier;
  double phase = 0.0;                    // radians
  double amplitude_scale_mhz_per_volt = 735.0;

  void validate() const;
};

enum class FrameKind { Lab, Rotating };

/// Reference frame rotating at `freq` on every excitation (a†a + sum n_i).
struct Frame {
  FrameKind kind = FrameKind::Rotating;
  Frequency freq;

  static Frame lab() { return {FrameKind::Lab, Frequency{}}; }
  static Frame rotating(Frequency f) { return {FrameKind::Rotating, f}; }
  Frequency offset() const { return kind == FrameKind::Lab ? Frequency{} : freq; }
};

/// c(t) * raising + conj(c(t)) * raising†
struct DriveTerm {
  Operator raising;
  std::function<Complex(double)> coefficient;
};

/// H(t) = H_static + sum_k terms_k(t), in rad/us.
struct TimeDependentHamiltonian {
  Operator static_part;
  std::vector<DriveTerm> terms;

  Operator at(double t_us) const;
};

struct CollapseChannel {
  std::string label;
  Operator op;
  double rate = 0.0;  // rad/us, enters as rate * D[op]
};

/// Slot of qubit i in the tensor product (resonator is slot 0).
constexpr std::size_t qubit_slot(std::size_t qubit) { return qubit + 1; }

/// Lab-frame H_sys in rad/us.
Operator build_static_hamiltonian(const SystemSpec& spec);
/// H_sys - omega_frame * N, i.e. every bare frequency shifted by -frame_freq.
Operator build_rotating_frame(const SystemSpec& spec, Frequency frame_freq);
Operator build_hamiltonian_in(const SystemSpec& spec, const Frame& frame);

/// Drive Hamiltonian at time t. Rotating frame: co-rotating half of the
/// carrier, A(t)/2 sum_i eta_i (sigma+_i e^{-i(dw t + phase)} + h.c.) for qubit
/// drives and eps(t) (a† e^{-i(...)} + h.c.) for the probe. Lab frame keeps
/// the full cosine: A(t) cos(w t + phase) sum_i eta_i (sigma+ + sigma-), and
/// 2 eps(t) cos(w t + phase) (a + a†).
Operator build_drive_term(const SystemSpec& spec, const DriveSpec& drive, double t_us,
                          const Frame& frame);
/// Same term in the integrator's callback form.
DriveTerm make_drive_term(const SystemSpec& spec, const DriveSpec& drive, const Frame& frame);

TimeDependentHamiltonian build_time_dependent_hamiltonian(const SystemSpec& spec,
                                                          const std::vector<DriveSpec>& drives,
                                                          const Frame& frame);

/// Resonator decay (a, kappa), relaxation (sigma-_i, Gamma_i) and pure
/// dephasing (sigma+_i sigma-_i, Gamma^phi_i). Zero-rate channels are kept.
std::vector<CollapseChannel> build_collapse_operators(const SystemSpec& spec);

/// True when the carrier is within 1% of every bare transition it drives.
bool rwa_valid(const SystemSpec& spec, const DriveSpec& drive);

Operator excitation_number(const SystemSpec& spec);
Operator photon_number(const SystemSpec& spec);
Operator qubit_population(const SystemSpec& spec, std::size_t qubit);

/// |n=0, all qubits ground> with the listed qubits excited.
DensityMatrix product_state(const SystemSpec& spec, const std::vector<std::size_t>& excited = {});

/// Transform rho from frame `from` to frame `to` at time t.
DensityMatrix change_frame(const DensityMatrix& rho, const SystemSpec& spec, const Frame& from,
                           const Frame& to, double t_us);

/// Re-express rho with a different Fock cutoff. Growing pads with zeros;
/// shrinking requires the discarded population to be < 1e-6 and renormalizes.
DensityMatrix resize_cutoff(const DensityMatrix& rho, std::size_t cutoff);

}  // namespace neoqed
