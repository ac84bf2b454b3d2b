#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "neoqed/model.hpp"
#include "neoqed/operator.hpp"

namespace neoqed {

enum class IntegratorMethod { FixedRk4, AdaptiveDopri5 };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::AdaptiveDopri5;
  double dt_us = 1e-3;        // fixed-step size
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step_us = 0.0;   // 0 = unbounded
  double t_end_us = 0.0;
  std::vector<double> sample_times_us;
  bool check_positivity = true;   // eigen-check at every sample
  bool store_states = false;      // keep rho at every sample
  std::optional<std::size_t> fock_slot = 0;  // factor checked for cutoff saturation
  std::size_t max_steps = 20'000'000;

  void validate() const;
  /// n+1 uniformly spaced samples over [0, t_end].
  static std::vector<double> uniform_samples(double t_end_us, std::size_t n);
};

struct Observable {
  std::string name;
  Operator op;
};

/// P_excited per qubit ("p_<name>"), photon number "n_bar" and the two
/// quadratures <a + a†>/2 ("x_quad") and <(a - a†)/2i> ("p_quad").
std::vector<Observable> standard_observables(const SystemSpec& spec);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> names;            // observables, then "purity"
  std::vector<std::vector<double>> series;   // series[k][sample]
  std::vector<DensityMatrix> states;         // only with store_states
  DensityMatrix final_state;
  std::vector<std::string> warnings;

  double max_trace_drift = 0.0;
  double max_hermiticity_defect = 0.0;
  double min_eigenvalue = 1.0;
  double max_top_fock_population = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  const std::vector<double>& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Integrates d rho/dt = -i[H(t), rho] + sum_k rate_k D[L_k] rho from t=0 to
/// cfg.t_end_us. Throws Error(Integration) on step-size underflow or when a
/// sampled state has an eigenvalue below -1e-5.
Trajectory evolve(const DensityMatrix& rho0, const TimeDependentHamiltonian& h,
                  const std::vector<CollapseChannel>& collapses, const IntegratorConfig& cfg,
                  const std::vector<Observable>& observables = {});

struct PhotonNumberResult {
  double n_bar = 0.0;        // at the end of the probe window
  double peak_n_bar = 0.0;
  bool cutoff_saturated = false;
  Trajectory trajectory;
};

/// Resonant square probe on the resonator starting from the ground state,
/// integrated in the resonator frame.
PhotonNumberResult steady_photon_number(const SystemSpec& spec, double epsilon_mhz,
                                        double duration_us, IntegratorConfig cfg = {});

}  // namespace neoqed
