#include "neoqed/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <memory>
#include <optional>

namespace neoqed {

namespace {

constexpr double kTraceWarn = 1e-8;
constexpr double kPositivityAbort = -1e-5;
constexpr double kTopFockWarn = 1e-4;

/// Sparse operator S stored for right multiplication X -> X S, one entry per
/// (output column, input column) pair so every update is a contiguous
/// column axpy on column-major storage.
class RightFactor {
 public:
  explicit RightFactor(const Matrix& s) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      for (Eigen::Index k = 0; k < s.rows(); ++k) {
        if (s(k, c) != Complex(0.0)) entries_.push_back({c, k, s(k, c)});
      }
    }
  }

  /// out += scale * x * S
  void apply(const Matrix& x, Complex scale, Matrix& out) const {
    for (const auto& e : entries_) out.col(e.out_col) += (scale * e.value) * x.col(e.in_col);
  }

 private:
  struct Entry {
    Eigen::Index out_col;
    Eigen::Index in_col;
    Complex value;
  };
  std::vector<Entry> entries_;
};

/// L rho L† for an operator with at most one nonzero per row and column
/// (ladder operators, sigma-, projectors): a gather instead of two products.
class MonomialSandwich {
 public:
  static std::optional<MonomialSandwich> from(const Matrix& l) {
    MonomialSandwich m;
    std::vector<bool> col_used(static_cast<std::size_t>(l.cols()), false);
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      Eigen::Index src = -1;
      for (Eigen::Index k = 0; k < l.cols(); ++k) {
        if (l(r, k) == Complex(0.0)) continue;
        if (src >= 0 || col_used[static_cast<std::size_t>(k)]) return std::nullopt;
        src = k;
      }
      if (src < 0) continue;
      col_used[static_cast<std::size_t>(src)] = true;
      m.rows_.push_back(r);
      m.srcs_.push_back(src);
      m.vals_.push_back(l(r, src));
    }
    return m;
  }

  /// out += rate * L rho L†
  void apply(const Matrix& rho, double rate, Matrix& out) const {
    const std::size_t n = rows_.size();
    for (std::size_t j = 0; j < n; ++j) {
      const Complex w = rate * std::conj(vals_[j]);
      const Complex* x = rho.data() + srcs_[j] * rho.rows();
      Complex* o = out.data() + rows_[j] * out.rows();
      for (std::size_t i = 0; i < n; ++i) {
        // Spelled out: std::complex operator* is not inlined without
        // -fcx-limited-range and dominates this loop otherwise.
        const Complex v = vals_[i];
        const Complex xs = x[srcs_[i]];
        const double ar = v.real() * xs.real() - v.imag() * xs.imag();
        const double ai = v.real() * xs.imag() + v.imag() * xs.real();
        o[rows_[i]] += Complex(w.real() * ar - w.imag() * ai, w.real() * ai + w.imag() * ar);
      }
    }
  }

 private:
  std::vector<Eigen::Index> rows_;
  std::vector<Eigen::Index> srcs_;
  std::vector<Complex> vals_;
};

/// Right-hand side of the master equation. For Hermitian rho,
///   -i H_eff rho = Z†  with  Z = rho (i H_eff†),  H_eff = H - (i/2) sum_k g_k L_k† L_k
///   L rho L†     = (rho L†)† L†
/// so d rho/dt = Z + Z† + sum_k g_k (rho L_k†)† L_k† needs right products only.
class LindbladRhs {
 public:
  LindbladRhs(const TimeDependentHamiltonian& h, const std::vector<CollapseChannel>& collapses) {
    const Matrix& hs = h.static_part.matrix();
    Matrix right = Complex(0.0, 1.0) * hs;
    for (const auto& c : collapses) {
      if (c.rate == 0.0) continue;
      if (!(c.op.space() == h.static_part.space())) {
        throw Error(ErrorKind::DimensionMismatch,
                    "collapse operator '" + c.label + "' lives in a different space");
      }
      right -= (0.5 * c.rate) * (c.op.matrix().adjoint() * c.op.matrix());
      jumps_.push_back({RightFactor(c.op.matrix().adjoint()), c.rate,
                        MonomialSandwich::from(c.op.matrix())});
    }
    static_ = std::make_unique<RightFactor>(right);
    for (const auto& t : h.terms) {
      if (!(t.raising.space() == h.static_part.space())) {
        throw Error(ErrorKind::DimensionMismatch, "drive term lives in a different space");
      }
      terms_.push_back({RightFactor(t.raising.matrix()), RightFactor(t.raising.matrix().adjoint()),
                        t.coefficient});
    }
    const auto n = hs.rows();
    z_.resize(n, n);
    tmp_.resize(n, n);
    adj_.resize(n, n);
  }

  void operator()(double t, const Matrix& rho, Matrix& out) {
    z_.setZero();
    static_->apply(rho, Complex(1.0), z_);
    for (const auto& term : terms_) {
      const Complex c = term.coefficient(t);
      if (c == Complex(0.0)) continue;
      term.raising.apply(rho, Complex(0.0, 1.0) * c, z_);
      term.lowering.apply(rho, Complex(0.0, 1.0) * std::conj(c), z_);
    }
    out = z_ + z_.adjoint();
    for (const auto& jump : jumps_) {
      if (jump.monomial) {
        jump.monomial->apply(rho, jump.rate, out);
        continue;
      }
      tmp_.setZero();
      jump.adjoint.apply(rho, Complex(1.0), tmp_);
      adj_ = tmp_.adjoint();
      jump.adjoint.apply(adj_, Complex(jump.rate), out);
    }
  }

 private:
  struct Jump {
    RightFactor adjoint;
    double rate;
    std::optional<MonomialSandwich> monomial;
  };
  struct Term {
    RightFactor raising;
    RightFactor lowering;
    std::function<Complex(double)> coefficient;
  };
  std::unique_ptr<RightFactor> static_;
  std::vector<Jump> jumps_;
  std::vector<Term> terms_;
  Matrix z_;
  Matrix tmp_;
  Matrix adj_;
};

/// Records observables, diagnostics and optional states at sample times.
class Recorder {
 public:
  Recorder(const HilbertSpace& space, const IntegratorConfig& cfg,
           const std::vector<Observable>& observables, Trajectory& out)
      : space_(space), cfg_(cfg), out_(out) {
    for (const auto& o : observables) {
      if (!(o.op.space() == space)) {
        throw Error(ErrorKind::DimensionMismatch, "observable '" + o.name + "' space mismatch");
      }
      transposed_.push_back(o.op.matrix().transpose());
      out_.names.push_back(o.name);
    }
    out_.names.push_back("purity");
    out_.series.assign(out_.names.size(), {});
    if (cfg.fock_slot && *cfg.fock_slot < space.num_factors() && space.num_factors() > 0) {
      const std::size_t slot = *cfg.fock_slot;
      const std::size_t top = space.factor(slot) - 1;
      for (std::size_t k = 0; k < space.total_dim(); ++k) {
        if (space.digits_of(k)[slot] == top) top_fock_indices_.push_back(static_cast<Eigen::Index>(k));
      }
    }
  }

  void record(double t, const Matrix& rho) {
    out_.times.push_back(t);
    for (std::size_t k = 0; k < transposed_.size(); ++k) {
      out_.series[k].push_back(rho.cwiseProduct(transposed_[k]).sum().real());
    }
    out_.series.back().push_back(rho.squaredNorm());

    const double drift = std::abs(rho.trace() - Complex(1.0));
    out_.max_trace_drift = std::max(out_.max_trace_drift, drift);
    if (drift > kTraceWarn && !trace_warned_) {
      trace_warned_ = true;
      out_.warnings.push_back("trace drift " + std::to_string(drift) + " at t=" + std::to_string(t));
    }
    out_.max_hermiticity_defect =
        std::max(out_.max_hermiticity_defect, (rho - rho.adjoint()).cwiseAbs().maxCoeff());

    if (!top_fock_indices_.empty()) {
      double top = 0.0;
      for (auto k : top_fock_indices_) top += rho(k, k).real();
      out_.max_top_fock_population = std::max(out_.max_top_fock_population, top);
      if (top > kTopFockWarn && !fock_warned_) {
        fock_warned_ = true;
        std::ostringstream os;
        os << "Fock cutoff saturated: top-level population " << top << " at t=" << t
           << " us; raise the cutoff";
        out_.warnings.push_back(os.str());
      }
    }

    if (cfg_.check_positivity) {
      Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (rho + rho.adjoint()),
                                                   Eigen::EigenvaluesOnly);
      const double lo = solver.eigenvalues()(0);
      out_.min_eigenvalue = std::min(out_.min_eigenvalue, lo);
      if (lo < kPositivityAbort) {
        std::ostringstream os;
        os << "positivity violated: minimum eigenvalue " << lo << " at t=" << t
           << " us (tolerances rel=" << cfg_.rel_tol << " abs=" << cfg_.abs_tol << ")";
        throw Error(ErrorKind::Integration, os.str());
      }
    }
    if (cfg_.store_states) {
      out_.states.emplace_back(space_, 0.5 * (rho + rho.adjoint()));
    }
  }

 private:
  const HilbertSpace& space_;
  const IntegratorConfig& cfg_;
  Trajectory& out_;
  std::vector<Matrix> transposed_;
  std::vector<Eigen::Index> top_fock_indices_;
  bool trace_warned_ = false;
  bool fock_warned_ = false;
};

void hermitize(Matrix& m) { m = 0.5 * (m + m.adjoint()).eval(); }

void run_fixed_rk4(LindbladRhs& rhs, Matrix& rho, const IntegratorConfig& cfg, Recorder& rec,
                   Trajectory& out) {
  const auto n = rho.rows();
  Matrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), tmp(n, n);
  double t = 0.0;
  std::size_t next = 0;
  const auto& samples = cfg.sample_times_us;
  while (next < samples.size() && samples[next] <= 0.0) {
    rec.record(0.0, rho);
    ++next;
  }
  std::vector<double> targets(samples.begin() + static_cast<std::ptrdiff_t>(next), samples.end());
  if (targets.empty() || targets.back() < cfg.t_end_us) targets.push_back(cfg.t_end_us);
  for (double target : targets) {
    const double span = target - t;
    if (span > 0.0) {
      const auto steps = static_cast<std::size_t>(std::ceil(span / cfg.dt_us - 1e-9));
      const double h = span / static_cast<double>(std::max<std::size_t>(steps, 1));
      for (std::size_t s = 0; s < std::max<std::size_t>(steps, 1); ++s) {
        const double t0 = t + static_cast<double>(s) * h;
        rhs(t0, rho, k1);
        tmp = rho + (0.5 * h) * k1;
        rhs(t0 + 0.5 * h, tmp, k2);
        tmp = rho + (0.5 * h) * k2;
        rhs(t0 + 0.5 * h, tmp, k3);
        tmp = rho + h * k3;
        rhs(t0 + h, tmp, k4);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        hermitize(rho);
        ++out.accepted_steps;
      }
      t = target;
    }
    if (next < samples.size() && samples[next] == target) {
      rec.record(target, rho);
      ++next;
    }
  }
}

double scaled_error(const Matrix& err, const Matrix& y0, const Matrix& y1, double atol, double rtol) {
  double worst = 0.0;
  const auto total = err.size();
  const Complex* e = err.data();
  const Complex* a = y0.data();
  const Complex* b = y1.data();
  for (Eigen::Index k = 0; k < total; ++k) {
    const double scale = atol + rtol * std::max(std::abs(a[k]), std::abs(b[k]));
    worst = std::max(worst, std::abs(e[k]) / scale);
  }
  return worst;
}

void run_dopri5(LindbladRhs& rhs, Matrix& rho, const IntegratorConfig& cfg, Recorder& rec,
                Trajectory& out) {
  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const auto n = rho.rows();
  Matrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), k5(n, n), k6(n, n), k7(n, n);
  Matrix tmp(n, n), y1(n, n), err(n, n);

  const auto& samples = cfg.sample_times_us;
  std::size_t next = 0;
  while (next < samples.size() && samples[next] <= 0.0) {
    rec.record(0.0, rho);
    ++next;
  }

  double t = 0.0;
  const double t_end = cfg.t_end_us;
  rhs(t, rho, k1);

  // Initial step from the scaled size of the derivative.
  double h;
  {
    const double d0 = rho.cwiseAbs().maxCoeff();
    const double d1 = k1.cwiseAbs().maxCoeff();
    h = (d1 > 1e-12) ? 0.01 * std::max(d0, cfg.abs_tol) / d1 : 1e-3 * t_end;
    h = std::min(h, t_end);
    if (cfg.max_step_us > 0.0) h = std::min(h, cfg.max_step_us);
  }
  const double h_min = 1e-14 * std::max(1.0, t_end);

  std::size_t steps = 0;
  while (t < t_end) {
    if (++steps > cfg.max_steps) {
      throw Error(ErrorKind::Integration, "maximum number of integrator steps exceeded");
    }
    if (t + h > t_end) h = t_end - t;
    if (h < h_min) {
      std::ostringstream os;
      os << "step size underflow (h=" << h << " us) at t=" << t << " us; problem too stiff";
      throw Error(ErrorKind::Integration, os.str());
    }

    tmp = rho + h * (a21 * k1);
    rhs(t + c2 * h, tmp, k2);
    tmp = rho + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, tmp, k3);
    tmp = rho + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, tmp, k4);
    tmp = rho + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, tmp, k5);
    tmp = rho + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, tmp, k6);
    y1 = rho + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, y1, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double e = scaled_error(err, rho, y1, cfg.abs_tol, cfg.rel_tol);
    if (e <= 1.0) {
      const double t1 = t + h;
      // Cubic Hermite dense output between (t, rho, k1) and (t1, y1, k7).
      while (next < samples.size() && samples[next] <= t1) {
        const double s = (samples[next] - t) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        const double h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s);
        const double h11 = s * s * (s - 1);
        tmp = h00 * rho + (h10 * h) * k1 + h01 * y1 + (h11 * h) * k7;
        rec.record(samples[next], tmp);
        ++next;
      }
      rho.swap(y1);
      hermitize(rho);
      k1.swap(k7);  // FSAL
      t = t1;
      ++out.accepted_steps;
      const double factor = (e == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
      h *= factor;
    } else {
      ++out.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(e, -0.25));
    }
    if (cfg.max_step_us > 0.0) h = std::min(h, cfg.max_step_us);
  }
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(t_end_us > 0.0) || !std::isfinite(t_end_us)) {
    throw Error(ErrorKind::Integration, "t_end must be > 0");
  }
  if (method == IntegratorMethod::FixedRk4 && !(dt_us > 0.0)) {
    throw Error(ErrorKind::Integration, "dt must be > 0");
  }
  if (method == IntegratorMethod::AdaptiveDopri5 && (!(rel_tol > 0.0) || !(abs_tol > 0.0))) {
    throw Error(ErrorKind::Integration, "tolerances must be > 0");
  }
  for (std::size_t k = 0; k < sample_times_us.size(); ++k) {
    const double s = sample_times_us[k];
    if (s < 0.0 || s > t_end_us + 1e-12) {
      throw Error(ErrorKind::Integration, "sample time outside [0, t_end]");
    }
    if (k > 0 && s < sample_times_us[k - 1]) {
      throw Error(ErrorKind::Integration, "sample times must be sorted");
    }
  }
}

std::vector<double> IntegratorConfig::uniform_samples(double t_end_us, std::size_t n) {
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    out[k] = t_end_us * static_cast<double>(k) / static_cast<double>(n);
  }
  out.back() = t_end_us;
  return out;
}

std::vector<Observable> standard_observables(const SystemSpec& spec) {
  std::vector<Observable> out;
  for (std::size_t q = 0; q < spec.qubits.size(); ++q) {
    out.push_back({"p_" + spec.qubits[q].name, qubit_population(spec, q)});
  }
  const HilbertSpace space = spec.space();
  const Operator a = embed(annihilation(spec.resonator.cutoff), 0, space);
  out.push_back({"n_bar", a.adjoint() * a});
  out.push_back({"x_quad", 0.5 * (a + a.adjoint())});
  out.push_back({"p_quad", Complex(0.0, -0.5) * (a - a.adjoint())});
  return out;
}

const std::vector<double>& Trajectory::get(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return series[k];
  }
  throw Error(ErrorKind::InvalidSpec, "trajectory has no observable '" + name + "'");
}

bool Trajectory::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

Trajectory evolve(const DensityMatrix& rho0, const TimeDependentHamiltonian& h,
                  const std::vector<CollapseChannel>& collapses, const IntegratorConfig& cfg,
                  const std::vector<Observable>& observables) {
  cfg.validate();
  if (!(rho0.space() == h.static_part.space())) {
    throw Error(ErrorKind::DimensionMismatch, "initial state and Hamiltonian spaces differ");
  }
  Trajectory out;
  LindbladRhs rhs(h, collapses);
  Recorder rec(rho0.space(), cfg, observables, out);
  Matrix rho = rho0.matrix();
  if (cfg.method == IntegratorMethod::FixedRk4) {
    run_fixed_rk4(rhs, rho, cfg, rec, out);
  } else {
    run_dopri5(rhs, rho, cfg, rec, out);
  }
  const double drift = std::abs(rho.trace() - Complex(1.0));
  out.max_trace_drift = std::max(out.max_trace_drift, drift);
  if (drift > kTraceWarn) {
    throw Error(ErrorKind::Integration, "trace drift " + std::to_string(drift) + " at end of run");
  }
  hermitize(rho);
  out.final_state = DensityMatrix(rho0.space(), std::move(rho));
  return out;
}

PhotonNumberResult steady_photon_number(const SystemSpec& spec, double epsilon_mhz,
                                        double duration_us, IntegratorConfig cfg) {
  const Frame frame = Frame::rotating(spec.resonator.omega);
  DriveSpec probe;
  probe.target = DriveTarget::ResonatorProbe;
  probe.envelope = PulseEnvelope::square(epsilon_mhz, duration_us);
  probe.carrier = spec.resonator.omega;
  const auto h = build_time_dependent_hamiltonian(spec, {probe}, frame);
  cfg.t_end_us = duration_us;
  if (cfg.sample_times_us.empty()) cfg.sample_times_us = IntegratorConfig::uniform_samples(duration_us, 140);
  cfg.fock_slot = 0;
  PhotonNumberResult result;
  result.trajectory = evolve(product_state(spec), h, build_collapse_operators(spec), cfg,
                             {{"n_bar", photon_number(spec)}});
  const auto& n = result.trajectory.get("n_bar");
  result.n_bar = n.back();
  result.peak_n_bar = *std::max_element(n.begin(), n.end());
  result.cutoff_saturated = result.trajectory.max_top_fock_population > kTopFockWarn;
  return result;
}

}  // namespace neoqed
