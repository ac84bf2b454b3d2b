#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "neoqed/model.hpp"
#include "neoqed/operator.hpp"
#include "neoqed/sweep.hpp"

namespace neoqed {

// ---------------------------------------------------------------------------
// Closed-form oracles. Every argument and result is a cyclic frequency in
// one consistent unit (MHz throughout this code base).

/// chi = g^2 / delta. Throws for delta == 0 (dispersive regime violated).
double oracle_dispersive_shift(double g, double delta);
/// Omega_CR = A J / (delta_bd + 2 J^2 / delta_bd)
double oracle_cr_frequency(double amplitude, double j, double delta_bd);
/// Omega_bSWAP = 2 A^2 J / (delta_bd + 2 J^2 / delta_bd)^2
double oracle_bswap_frequency(double amplitude, double j, double delta_bd);
/// Drive amplitude that yields a given bSWAP frequency (inverse of the above).
double oracle_bswap_amplitude(double omega_bswap, double j, double delta_bd);
/// Drive amplitude that yields a given CR frequency.
double oracle_cr_amplitude(double omega_cr, double j, double delta_bd);
/// Resonator-mediated exchange J = g_b g_d (1/delta_b + 1/delta_d) / 2.
double oracle_virtual_exchange(double g_b, double g_d, double delta_b, double delta_d);
/// ac-Stark shift 2 n chi.
double oracle_ac_stark(double n_bar, double chi);
/// Exchange oscillation frequency sqrt(delta_bd^2 + 4 J^2).
double oracle_swap_frequency(double delta_bd, double j);
/// Photon number at which 2 n chi = delta_bd.
double oracle_swap_threshold(double delta_bd, double chi);

// ---------------------------------------------------------------------------
// Curve fitting

struct FitParameter {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;  // 1-sigma from the residual-scaled covariance
};

struct FitResult {
  std::string model;
  std::vector<FitParameter> params;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> flags;  // "max-iterations", "degenerate-amplitude", ...

  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
  bool flagged(const std::string& flag) const;
};

struct FitOptions {
  std::size_t max_iterations = 200;
};

/// y = amplitude exp(-t / tau) + offset, seeded by log-linear regression.
FitResult fit_exponential(const std::vector<double>& t, const std::vector<double>& y,
                          const FitOptions& opts = {});

/// y = amplitude exp(-t / tau) cos(2 pi freq t + phase) + offset, seeded from
/// the dominant Fourier peak.
FitResult fit_damped_sinusoid(const std::vector<double>& t, const std::vector<double>& y,
                              const FitOptions& opts = {});

/// y = exp(-t / tau) sum_k amp_k cos(2 pi freq_k t + phase_k) + offset with a
/// shared decay constant, k < K <= 4. Parameters are named amp_k, freq_k,
/// phase_k, tau, offset.
FitResult fit_multi_frequency(const std::vector<double>& t, const std::vector<double>& y,
                              std::size_t k, const FitOptions& opts = {});

struct SpectralPeak {
  double frequency = 0.0;  // cycles per unit of t
  double amplitude = 0.0;  // cosine amplitude estimate
  double phase = 0.0;
};

/// Strongest `count` local maxima of the zero-padded DFT of the mean-removed
/// series (uniform sampling required), refined by parabolic interpolation.
/// Sorted by decreasing amplitude.
std::vector<SpectralPeak> dominant_frequencies(const std::vector<double>& t,
                                               const std::vector<double>& y, std::size_t count,
                                               std::size_t pad_factor = 8);

// ---------------------------------------------------------------------------
// Avoided crossings

struct BranchPoint {
  double control = 0.0;
  double lower = 0.0;  // MHz
  double upper = 0.0;  // MHz
  double linewidth = 0.0;  // mean FWHM of the two fitted lines, MHz
  bool resolved = false;
};

struct AvoidedCrossing {
  double gap_mhz = 0.0;       // minimum branch separation
  double half_gap_mhz = 0.0;  // gap / 2, the Hamiltonian coefficient for degenerate qubits
  double location = 0.0;      // control-axis value of the minimum
  double linewidth_mhz = 0.0;
  bool flagged = false;
  std::string message;
  std::vector<BranchPoint> branches;
};

/// Two-peak Lorentzian fit of every axis1 column of `field` along axis2
/// (frequency, GHz or MHz), then a hyperbolic fit of the branch separation
/// around its minimum. Flags the result when the branches are unresolved
/// (gap < 2 linewidths) or too few columns resolve two peaks.
AvoidedCrossing extract_avoided_crossing(const SweepResult& sweep, const std::string& field);

/// Same hyperbolic minimum search for branches that are already known, e.g.
/// sorted eigenfrequencies.
AvoidedCrossing min_branch_separation(const std::vector<double>& control,
                                      const std::vector<double>& lower_mhz,
                                      const std::vector<double>& upper_mhz);

// ---------------------------------------------------------------------------
// Dressed spectrum

/// Eigenfrequencies (MHz, lab frame) of the static Hamiltonian labeled by the
/// bare product state with the largest overlap.
struct DressedSpectrum {
  std::vector<double> energies_mhz;         // indexed by bare basis index
  std::vector<double> bare_overlap;         // |<bare|dressed>|^2 of the assignment
  Matrix states;                            // column i: dressed state labeled by bare index i
  HilbertSpace space;

  double energy(const std::vector<std::size_t>& digits) const;
  /// Transition frequency between two labeled states, MHz.
  double transition(const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) const;
  /// Excited-state weight of qubit q in the dressed state labeled by `digits`.
  double qubit_character(const std::vector<std::size_t>& digits, std::size_t q) const;
};

DressedSpectrum dressed_spectrum(const SystemSpec& spec);

/// omega_11 - omega_01 - omega_10 (+ omega_00) for qubits qa, qb with the
/// resonator in vacuum, MHz.
double zz_shift_mhz(const SystemSpec& spec, std::size_t qa = 0, std::size_t qb = 1);

}  // namespace neoqed
