#pragma once

#include "neoqed/model.hpp"

namespace neoqed::testing {

/// Two-qubit bright/dark device: resonator 5.668 GHz, kappa 0.38 MHz.
inline SystemSpec two_qubit_spec(std::size_t cutoff = 3) {
  SystemSpec s;
  s.resonator = {Frequency::ghz(5.668), Frequency::mhz(0.38), cutoff};
  s.qubits.push_back({"b", Frequency::ghz(5.7112), Frequency::mhz(3.76), Frequency::mhz(0.088),
                      Frequency::mhz(0.036), 1.0});
  s.qubits.push_back({"d", Frequency::ghz(5.7255), Frequency::mhz(0.0), Frequency::mhz(0.0053),
                      Frequency::mhz(0.0044), 0.0});
  s.couplings.push_back({0, 1, Frequency::mhz(3.35)});
  return s;
}

/// Single qubit (with a spectator two-level resonator) and no dissipation.
inline SystemSpec single_qubit_spec(double omega_ghz = 5.0) {
  SystemSpec s;
  s.resonator = {Frequency::ghz(7.0), Frequency::mhz(0.0), 2};
  s.qubits.push_back({"q", Frequency::ghz(omega_ghz), Frequency::mhz(0.0), Frequency::mhz(0.0),
                      Frequency::mhz(0.0), 1.0});
  return s;
}

}  // namespace neoqed::testing
