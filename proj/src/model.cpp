#include "neoqed/model.hpp"

#include <cmath>
#include <sstream>

namespace neoqed {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

bool finite(Frequency f) { return std::isfinite(f.in_mhz()); }

Operator qubit_op(const HilbertSpace& space, std::size_t q, PauliKind kind) {
  return embed(pauli(kind), qubit_slot(q), space);
}

Operator resonator_lowering(const HilbertSpace& space) {
  return embed(annihilation(space.factor(0)), 0, space);
}

/// Sum of eta_i sigma+_i.
Operator weighted_raising(const SystemSpec& spec, const HilbertSpace& space) {
  Operator out = Operator::zero(space);
  for (std::size_t q = 0; q < spec.qubits.size(); ++q) {
    if (spec.qubits[q].eta != 0.0) {
      out += spec.qubits[q].eta * qubit_op(space, q, PauliKind::Plus);
    }
  }
  return out;
}

}  // namespace

void SystemSpec::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  check(finite(resonator.omega) && resonator.omega.in_mhz() > 0, "resonator.omega must be > 0");
  check(finite(resonator.kappa) && resonator.kappa.in_mhz() >= 0, "resonator.kappa must be >= 0");
  check(resonator.cutoff >= 2, "resonator.cutoff must be >= 2");
  check(!qubits.empty(), "at least one qubit is required");
  for (std::size_t q = 0; q < qubits.size(); ++q) {
    const auto& s = qubits[q];
    const std::string p = "qubits[" + std::to_string(q) + "].";
    check(finite(s.omega) && s.omega.in_mhz() > 0, p + "omega must be > 0");
    check(finite(s.g), p + "g must be finite");
    check(finite(s.gamma1) && s.gamma1.in_mhz() >= 0, p + "gamma1 must be >= 0");
    check(finite(s.gamma_phi) && s.gamma_phi.in_mhz() >= 0, p + "gamma_phi must be >= 0");
    check(std::isfinite(s.eta) && s.eta >= 0.0 && s.eta <= 1.0, p + "eta must lie in [0, 1]");
  }
  for (std::size_t c = 0; c < couplings.size(); ++c) {
    const auto& k = couplings[c];
    const std::string p = "couplings[" + std::to_string(c) + "].";
    check(k.i < qubits.size() && k.j < qubits.size(), p + "references a missing qubit");
    check(k.i != k.j, p + "pair must join two distinct qubits");
    check(finite(k.strength), p + "strength must be finite");
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "invalid system spec:";
    for (const auto& m : problems) os << "\n  - " << m;
    throw Error(ErrorKind::InvalidSpec, os.str());
  }
}

HilbertSpace SystemSpec::space() const {
  return HilbertSpace::cavity_qubits(resonator.cutoff, qubits.size());
}

SystemSpec SystemSpec::with_cutoff(std::size_t cutoff) const {
  SystemSpec copy = *this;
  copy.resonator.cutoff = cutoff;
  return copy;
}

std::size_t SystemSpec::qubit_index(const std::string& name) const {
  for (std::size_t q = 0; q < qubits.size(); ++q) {
    if (qubits[q].name == name) return q;
  }
  throw Error(ErrorKind::InvalidSpec, "no qubit named '" + name + "'");
}

PulseEnvelope PulseEnvelope::square(double amplitude_mhz, double duration_us) {
  return {EnvelopeShape::Square, amplitude_mhz, duration_us, 0.0};
}

PulseEnvelope PulseEnvelope::gaussian(double amplitude_mhz, double duration_us) {
  return {EnvelopeShape::Gaussian, amplitude_mhz, duration_us, duration_us / 5.0};
}

double PulseEnvelope::value(double t_us) const {
  if (t_us < 0.0 || t_us > duration_us) return 0.0;
  if (shape == EnvelopeShape::Square) return amplitude_mhz;
  const double x = (t_us - 0.5 * duration_us) / sigma_us;
  return amplitude_mhz * std::exp(-0.5 * x * x);
}

void PulseEnvelope::validate() const {
  if (!(duration_us > 0.0) || !std::isfinite(duration_us)) {
    throw Error(ErrorKind::InvalidSpec, "pulse duration must be > 0");
  }
  if (!std::isfinite(amplitude_mhz)) {
    throw Error(ErrorKind::InvalidSpec, "pulse amplitude must be finite");
  }
  if (shape == EnvelopeShape::Gaussian && std::abs(sigma_us * 5.0 - duration_us) > 1e-12 * duration_us) {
    throw Error(ErrorKind::InvalidSpec, "gaussian pulse must span exactly 5 sigma");
  }
}

void DriveSpec::validate() const {
  envelope.validate();
  if (!(carrier.in_mhz() > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "drive carrier must be > 0");
  }
}

Operator TimeDependentHamiltonian::at(double t_us) const {
  Operator h = static_part;
  for (const auto& term : terms) {
    const Complex c = term.coefficient(t_us);
    if (c == Complex(0.0)) continue;
    h += c * term.raising + std::conj(c) * term.raising.adjoint();
  }
  return h;
}

Operator build_hamiltonian_in(const SystemSpec& spec, const Frame& frame) {
  spec.validate();
  const HilbertSpace space = spec.space();
  const double shift = frame.offset().angular();

  const Operator a = resonator_lowering(space);
  Operator h = (spec.resonator.omega.angular() - shift) * (a.adjoint() * a);
  for (std::size_t q = 0; q < spec.qubits.size(); ++q) {
    const auto& s = spec.qubits[q];
    const Operator sp = qubit_op(space, q, PauliKind::Plus);
    const Operator sm = qubit_op(space, q, PauliKind::Minus);
    h += 0.5 * (s.omega.angular() - shift) * qubit_op(space, q, PauliKind::Z);
    if (s.g.in_mhz() != 0.0) {
      h += s.g.angular() * (a.adjoint() * sm + a * sp);
    }
  }
  for (const auto& c : spec.couplings) {
    const Operator spi = qubit_op(space, c.i, PauliKind::Plus);
    const Operator smi = qubit_op(space, c.i, PauliKind::Minus);
    const Operator spj = qubit_op(space, c.j, PauliKind::Plus);
    const Operator smj = qubit_op(space, c.j, PauliKind::Minus);
    h += c.strength.angular() * (spi * smj + smi * spj);
  }
  return h;
}

Operator build_static_hamiltonian(const SystemSpec& spec) {
  return build_hamiltonian_in(spec, Frame::lab());
}

Operator build_rotating_frame(const SystemSpec& spec, Frequency frame_freq) {
  if (!(frame_freq.in_mhz() > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "frame frequency must be > 0");
  }
  return build_hamiltonian_in(spec, Frame::rotating(frame_freq));
}

DriveTerm make_drive_term(const SystemSpec& spec, const DriveSpec& drive, const Frame& frame) {
  drive.validate();
  const HilbertSpace space = spec.space();
  DriveTerm term;
  // Amplitude X(t) of the full real tone X(t) cos(w t + phase) (O + O†).
  double tone_scale = 0.0;
  if (drive.target == DriveTarget::Qubits) {
    term.raising = weighted_raising(spec, space);
    tone_scale = 1.0;
  } else {
    term.raising = resonator_lowering(space).adjoint();
    tone_scale = 2.0;
  }
  const PulseEnvelope env = drive.envelope;
  const double phase = drive.phase;
  const double carrier = drive.carrier.angular();
  if (frame.kind == FrameKind::Lab) {
    term.coefficient = [env, phase, carrier, tone_scale](double t) -> Complex {
      const double x = tone_scale * Frequency::mhz(env.value(t)).angular();
      return Complex(x * std::cos(carrier * t + phase), 0.0);
    };
  } else {
    const double detuning = (drive.carrier - frame.freq).angular();
    term.coefficient = [env, phase, detuning, tone_scale](double t) -> Complex {
      const double x = 0.5 * tone_scale * Frequency::mhz(env.value(t)).angular();
      if (x == 0.0) return Complex(0.0);
      return x * std::polar(1.0, -(detuning * t + phase));
    };
  }
  return term;
}

Operator build_drive_term(const SystemSpec& spec, const DriveSpec& drive, double t_us,
                          const Frame& frame) {
  const DriveTerm term = make_drive_term(spec, drive, frame);
  const Complex c = term.coefficient(t_us);
  return c * term.raising + std::conj(c) * term.raising.adjoint();
}

TimeDependentHamiltonian build_time_dependent_hamiltonian(const SystemSpec& spec,
                                                          const std::vector<DriveSpec>& drives,
                                                          const Frame& frame) {
  TimeDependentHamiltonian h;
  h.static_part = build_hamiltonian_in(spec, frame);
  for (const auto& d : drives) h.terms.push_back(make_drive_term(spec, d, frame));
  return h;
}

std::vector<CollapseChannel> build_collapse_operators(const SystemSpec& spec) {
  spec.validate();
  const HilbertSpace space = spec.space();
  std::vector<CollapseChannel> out;
  out.push_back({"resonator-decay", resonator_lowering(space), spec.resonator.kappa.angular()});
  for (std::size_t q = 0; q < spec.qubits.size(); ++q) {
    const auto& s = spec.qubits[q];
    const Operator sm = qubit_op(space, q, PauliKind::Minus);
    out.push_back({s.name + "-relaxation", sm, s.gamma1.angular()});
    out.push_back({s.name + "-dephasing", sm.adjoint() * sm, s.gamma_phi.angular()});
  }
  return out;
}

bool rwa_valid(const SystemSpec& spec, const DriveSpec& drive) {
  const double carrier = drive.carrier.in_mhz();
  auto near = [carrier](Frequency f) { return std::abs(f.in_mhz() - carrier) < 0.01 * carrier; };
  if (drive.target == DriveTarget::ResonatorProbe) return near(spec.resonator.omega);
  for (const auto& q : spec.qubits) {
    if (q.eta != 0.0 && !near(q.omega)) return false;
  }
  return true;
}

Operator photon_number(const SystemSpec& spec) {
  const HilbertSpace space = spec.space();
  const Operator a = resonator_lowering(space);
  return a.adjoint() * a;
}

Operator qubit_population(const SystemSpec& spec, std::size_t qubit) {
  if (qubit >= spec.qubits.size()) {
    throw Error(ErrorKind::InvalidSpec, "qubit index out of range");
  }
  const HilbertSpace space = spec.space();
  const Operator sm = qubit_op(space, qubit, PauliKind::Minus);
  return sm.adjoint() * sm;
}

Operator excitation_number(const SystemSpec& spec) {
  Operator n = photon_number(spec);
  for (std::size_t q = 0; q < spec.qubits.size(); ++q) n += qubit_population(spec, q);
  return n;
}

DensityMatrix product_state(const SystemSpec& spec, const std::vector<std::size_t>& excited) {
  const HilbertSpace space = spec.space();
  std::vector<std::size_t> digits(space.num_factors(), 0);
  for (std::size_t q : excited) {
    if (q >= spec.qubits.size()) throw Error(ErrorKind::InvalidSpec, "qubit index out of range");
    digits[qubit_slot(q)] = 1;
  }
  return DensityMatrix::basis_state(space, digits);
}

DensityMatrix change_frame(const DensityMatrix& rho, const SystemSpec& spec, const Frame& from,
                           const Frame& to, double t_us) {
  const double dw = (to.offset() - from.offset()).angular();
  if (dw == 0.0) return rho;
  const HilbertSpace& space = rho.space();
  (void)spec;
  std::vector<double> n(space.total_dim());
  for (std::size_t k = 0; k < n.size(); ++k) {
    const auto digits = space.digits_of(k);
    double total = 0.0;
    for (std::size_t d : digits) total += static_cast<double>(d);
    n[k] = total;
  }
  Matrix m = rho.matrix();
  for (std::size_t j = 0; j < n.size(); ++j) {
    for (std::size_t k = 0; k < n.size(); ++k) {
      if (n[j] != n[k]) m(idx(j), idx(k)) *= std::polar(1.0, dw * t_us * (n[j] - n[k]));
    }
  }
  return DensityMatrix(space, std::move(m));
}

DensityMatrix resize_cutoff(const DensityMatrix& rho, std::size_t cutoff) {
  const HilbertSpace& old_space = rho.space();
  std::vector<std::size_t> factors = old_space.factors();
  factors[0] = cutoff;
  const HilbertSpace new_space(factors);
  const auto n_new = idx(new_space.total_dim());
  Matrix m = Matrix::Zero(n_new, n_new);
  double dropped = 0.0;
  std::vector<std::optional<std::size_t>> map(old_space.total_dim());
  for (std::size_t k = 0; k < old_space.total_dim(); ++k) {
    auto digits = old_space.digits_of(k);
    if (digits[0] < cutoff) {
      map[k] = new_space.index_of(digits);
    } else {
      dropped += rho.matrix()(idx(k), idx(k)).real();
    }
  }
  if (dropped > 1e-6) {
    throw Error(ErrorKind::InvalidDimension,
                "cannot shrink cutoff: discarded population " + std::to_string(dropped));
  }
  for (std::size_t j = 0; j < map.size(); ++j) {
    if (!map[j]) continue;
    for (std::size_t k = 0; k < map.size(); ++k) {
      if (!map[k]) continue;
      m(idx(*map[j]), idx(*map[k])) = rho.matrix()(idx(j), idx(k));
    }
  }
  const Complex tr = m.trace();
  m /= tr.real();
  m = 0.5 * (m + m.adjoint()).eval();
  return DensityMatrix(new_space, std::move(m));
}

}  // namespace neoqed
