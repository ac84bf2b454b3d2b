#include "neoqed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "neoqed/error.hpp"

namespace neoqed {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double denominator(double j, double delta_bd) {
  if (delta_bd == 0.0) throw Error(ErrorKind::InvalidSpec, "qubit detuning must be nonzero");
  return delta_bd + 2.0 * j * j / delta_bd;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt plumbing

using Vec = Eigen::VectorXd;
using ResidualFn = std::function<void(const Vec& p, Vec& r)>;

struct Residual : Eigen::DenseFunctor<double> {
  Residual(int n, int m, const ResidualFn* fn) : DenseFunctor<double>(n, m), fn_(fn) {}
  int operator()(const InputType& p, ValueType& r) const {
    (*fn_)(p, r);
    return 0;
  }
  const ResidualFn* fn_;
};

struct LmOutcome {
  Vec p;
  Vec sigma;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool hit_iteration_cap = false;
};

LmOutcome least_squares(Vec p0, std::size_t m, const ResidualFn& fn, std::size_t max_iterations) {
  const auto n = static_cast<int>(p0.size());
  Eigen::NumericalDiff<Residual, Eigen::Central> numdiff(Residual(n, static_cast<int>(m), &fn));
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Residual, Eigen::Central>> lm(numdiff);
  lm.setMaxfev(static_cast<Eigen::Index>(200 * (p0.size() + 1)));
  lm.setXtol(1e-12);
  lm.setFtol(1e-12);

  LmOutcome out;
  auto status = lm.minimizeInit(p0);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
    throw Error(ErrorKind::Fit, "fit needs at least as many points as parameters");
  }
  std::size_t iter = 0;
  do {
    status = lm.minimizeOneStep(p0);
    ++iter;
  } while (status == Eigen::LevenbergMarquardtSpace::Running && iter < max_iterations);

  out.p = p0;
  out.iterations = iter;
  out.hit_iteration_cap = status == Eigen::LevenbergMarquardtSpace::Running ||
                          status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
  out.converged = !out.hit_iteration_cap && p0.allFinite();

  Vec r(static_cast<Eigen::Index>(m));
  fn(p0, r);
  out.residual_norm = r.norm();

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), n);
  numdiff.df(p0, jac);
  const double dof = std::max<double>(1.0, static_cast<double>(m) - n);
  const double s2 = r.squaredNorm() / dof;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
  out.sigma = Vec::Constant(n, std::numeric_limits<double>::infinity());
  if (cod.rank() == n) {
    const Eigen::MatrixXd cov = s2 * cod.pseudoInverse();
    for (int k = 0; k < n; ++k) out.sigma(k) = std::sqrt(std::max(0.0, cov(k, k)));
  }
  return out;
}

FitResult to_result(std::string model, const std::vector<std::string>& names, const LmOutcome& lm) {
  FitResult res;
  res.model = std::move(model);
  for (std::size_t k = 0; k < names.size(); ++k) {
    res.params.push_back({names[k], lm.p(static_cast<Eigen::Index>(k)),
                          lm.sigma(static_cast<Eigen::Index>(k))});
  }
  res.residual_norm = lm.residual_norm;
  res.iterations = lm.iterations;
  res.converged = lm.converged;
  if (lm.hit_iteration_cap) res.flags.push_back("max-iterations");
  return res;
}

void check_series(const std::vector<double>& t, const std::vector<double>& y, std::size_t min_points) {
  if (t.size() != y.size()) throw Error(ErrorKind::Fit, "time and value series differ in length");
  if (t.size() < min_points) {
    throw Error(ErrorKind::Fit, "fit needs at least " + std::to_string(min_points) + " points");
  }
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!std::isfinite(t[k]) || !std::isfinite(y[k])) {
      throw Error(ErrorKind::Fit, "fit input contains non-finite values");
    }
  }
}

double span_of(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool is_constant(const std::vector<double>& y) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  return span_of(y) <= 1e-12 * (1.0 + std::abs(mean));
}

FitResult degenerate_fit(std::string model, std::vector<std::string> names,
                         const std::vector<double>& y) {
  FitResult res;
  res.model = std::move(model);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  for (auto& n : names) {
    const double v = n == "offset" ? mean : (n.starts_with("amp") ? 0.0 : kNaN);
    res.params.push_back({n, v, n == "offset" ? 0.0 : kNaN});
  }
  res.flags.push_back("degenerate-amplitude");
  return res;
}

// Multi-start over the decay constant; keeps the smallest residual.
template <typename Seed>
LmOutcome best_over_tau(const Seed& seed, std::size_t tau_index, double span, std::size_t m,
                        const ResidualFn& fn, std::size_t max_iterations) {
  LmOutcome best;
  best.residual_norm = std::numeric_limits<double>::infinity();
  for (double scale : {0.3, 1.0, 4.0}) {
    Vec p0 = seed;
    p0(static_cast<Eigen::Index>(tau_index)) = scale * span;
    LmOutcome out = least_squares(p0, m, fn, max_iterations);
    if (out.p.allFinite() && out.residual_norm < best.residual_norm) best = out;
  }
  if (!std::isfinite(best.residual_norm)) throw Error(ErrorKind::Fit, "fit diverged");
  return best;
}

double lorentzian(double f, double f0, double fwhm) {
  const double x = 2.0 * (f - f0) / fwhm;
  return 1.0 / (1.0 + x * x);
}

}  // namespace

// ---------------------------------------------------------------------------
// Oracles

double oracle_dispersive_shift(double g, double delta) {
  if (delta == 0.0) {
    throw Error(ErrorKind::InvalidSpec, "dispersive shift undefined at zero detuning");
  }
  return g * g / delta;
}

double oracle_cr_frequency(double amplitude, double j, double delta_bd) {
  return amplitude * j / denominator(j, delta_bd);
}

double oracle_bswap_frequency(double amplitude, double j, double delta_bd) {
  const double d = denominator(j, delta_bd);
  return 2.0 * amplitude * amplitude * j / (d * d);
}

double oracle_bswap_amplitude(double omega_bswap, double j, double delta_bd) {
  if (j == 0.0) throw Error(ErrorKind::InvalidSpec, "bSWAP needs a nonzero exchange coupling");
  const double d = denominator(j, delta_bd);
  return std::sqrt(omega_bswap * d * d / (2.0 * j));
}

double oracle_cr_amplitude(double omega_cr, double j, double delta_bd) {
  if (j == 0.0) throw Error(ErrorKind::InvalidSpec, "CR needs a nonzero exchange coupling");
  return omega_cr * denominator(j, delta_bd) / j;
}

double oracle_virtual_exchange(double g_b, double g_d, double delta_b, double delta_d) {
  if (delta_b == 0.0 || delta_d == 0.0) {
    throw Error(ErrorKind::InvalidSpec, "virtual exchange undefined at zero detuning");
  }
  return 0.5 * g_b * g_d * (1.0 / delta_b + 1.0 / delta_d);
}

double oracle_ac_stark(double n_bar, double chi) { return 2.0 * n_bar * chi; }

double oracle_swap_frequency(double delta_bd, double j) {
  return std::sqrt(delta_bd * delta_bd + 4.0 * j * j);
}

double oracle_swap_threshold(double delta_bd, double chi) {
  if (chi == 0.0) throw Error(ErrorKind::InvalidSpec, "swap threshold needs a nonzero shift");
  return delta_bd / (2.0 * chi);
}

// ---------------------------------------------------------------------------
// FitResult

double FitResult::value(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw Error(ErrorKind::Fit, "fit has no parameter '" + name + "'");
}

double FitResult::sigma(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.sigma;
  throw Error(ErrorKind::Fit, "fit has no parameter '" + name + "'");
}

bool FitResult::flagged(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

// ---------------------------------------------------------------------------
// Fits

FitResult fit_exponential(const std::vector<double>& t, const std::vector<double>& y,
                          const FitOptions& opts) {
  check_series(t, y, 4);
  const std::vector<std::string> names{"amplitude", "tau", "offset"};
  if (is_constant(y)) return degenerate_fit("exponential", names, y);

  // Seed: offset from the tail, tau from a log-linear regression.
  const std::size_t n = t.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double c0 = 0.0;
  for (std::size_t k = n - tail; k < n; ++k) c0 += y[k];
  c0 /= static_cast<double>(tail);
  const double a0 = y.front() - c0;
  double tau0 = span_of(t) / 3.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = (y[k] - c0) / a0;
      if (!(d > 0.05)) continue;
      const double ly = std::log(d);
      sx += t[k];
      sy += ly;
      sxx += t[k] * t[k];
      sxy += t[k] * ly;
      ++cnt;
    }
    const double den = static_cast<double>(cnt) * sxx - sx * sx;
    if (cnt >= 2 && den > 0) {
      const double slope = (static_cast<double>(cnt) * sxy - sx * sy) / den;
      if (slope < 0) tau0 = -1.0 / slope;
    }
  }

  const ResidualFn fn = [&](const Vec& p, Vec& r) {
    for (std::size_t k = 0; k < n; ++k) {
      r(static_cast<Eigen::Index>(k)) = p(0) * std::exp(-t[k] / p(1)) + p(2) - y[k];
    }
  };
  Vec p0(3);
  p0 << a0, tau0, c0;
  FitResult res = to_result("exponential", names, least_squares(p0, n, fn, opts.max_iterations));
  const double amp = res.value("amplitude");
  if (!(std::abs(amp) > 2.0 * res.sigma("amplitude"))) res.flags.push_back("degenerate-amplitude");
  if (res.value("tau") <= 0) res.flags.push_back("non-decaying");
  return res;
}

std::vector<SpectralPeak> dominant_frequencies(const std::vector<double>& t,
                                               const std::vector<double>& y, std::size_t count,
                                               std::size_t pad_factor) {
  check_series(t, y, 4);
  const std::size_t n = t.size();
  const double dt = (t.back() - t.front()) / static_cast<double>(n - 1);
  if (!(dt > 0)) throw Error(ErrorKind::Fit, "time samples must increase");
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(t[k] - t[k - 1] - dt) > 1e-6 * dt) {
      throw Error(ErrorKind::Fit, "spectral seeding needs uniformly spaced samples");
    }
  }
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::size_t nfft = 1;
  while (nfft < std::max<std::size_t>(pad_factor, 1) * n) nfft <<= 1;

  // Hann window keeps sidelobes of strong lines from posing as weak lines.
  std::vector<double> buf(nfft, 0.0);
  double gain = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n - 1)));
    buf[k] = w * (y[k] - mean);
    gain += w;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);

  const std::size_t half = nfft / 2;
  std::vector<double> mag(half);
  for (std::size_t k = 0; k < half; ++k) mag[k] = std::abs(spec[k]);
  const double peak_max = *std::max_element(mag.begin() + 1, mag.end());
  std::vector<SpectralPeak> peaks;
  if (!(peak_max > 0)) return peaks;
  for (std::size_t k = 1; k + 1 < half; ++k) {
    if (mag[k] < mag[k - 1] || mag[k] < mag[k + 1] || mag[k] < 0.02 * peak_max) continue;
    const double a = mag[k - 1], b = mag[k], c = mag[k + 1];
    const double den = a - 2.0 * b + c;
    const double delta = den != 0.0 ? std::clamp(0.5 * (a - c) / den, -0.5, 0.5) : 0.0;
    SpectralPeak p;
    p.frequency = (static_cast<double>(k) + delta) / (static_cast<double>(nfft) * dt);
    p.amplitude = 2.0 * (b - 0.25 * (a - c) * delta) / gain;
    // Undo the window centre offset and the start time.
    const double centre = 0.5 * static_cast<double>(n - 1) * dt;
    p.phase = std::arg(spec[k]) + kTwoPi * static_cast<double>(k) / static_cast<double>(nfft) *
                                      (0.5 * static_cast<double>(n - 1)) -
              kTwoPi * p.frequency * (t.front() + centre);
    p.phase = std::remainder(p.phase, kTwoPi);
    peaks.push_back(p);
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const SpectralPeak& l, const SpectralPeak& r) { return l.amplitude > r.amplitude; });
  if (peaks.size() > count) peaks.resize(count);
  return peaks;
}

FitResult fit_multi_frequency(const std::vector<double>& t, const std::vector<double>& y,
                              std::size_t k, const FitOptions& opts) {
  if (k < 1 || k > 4) throw Error(ErrorKind::Fit, "multi-frequency fit supports 1 to 4 components");
  check_series(t, y, 3 * k + 2 + 1);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) {
    const std::string s = std::to_string(c);
    names.insert(names.end(), {"amp_" + s, "freq_" + s, "phase_" + s});
  }
  names.insert(names.end(), {"tau", "offset"});
  const std::string model = k == 1 ? "damped_sinusoid" : "multi_frequency";
  if (is_constant(y)) return degenerate_fit(model, names, y);

  auto peaks = dominant_frequencies(t, y, k);
  if (peaks.empty()) throw Error(ErrorKind::Fit, "no spectral peak to seed the fit");
  // Missing components start as weak copies near the strongest line.
  while (peaks.size() < k) {
    SpectralPeak extra = peaks.front();
    extra.amplitude *= 0.1;
    extra.frequency *= 1.0 + 0.1 * static_cast<double>(peaks.size());
    peaks.push_back(extra);
  }
  const std::size_t n = t.size();
  const std::size_t np = names.size();
  const auto tau_i = static_cast<Eigen::Index>(3 * k);
  const ResidualFn fn = [&](const Vec& p, Vec& r) {
    for (std::size_t s = 0; s < n; ++s) {
      double v = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const auto b = static_cast<Eigen::Index>(3 * c);
        v += p(b) * std::cos(kTwoPi * p(b + 1) * t[s] + p(b + 2));
      }
      r(static_cast<Eigen::Index>(s)) = std::exp(-t[s] / p(tau_i)) * v + p(tau_i + 1) - y[s];
    }
  };
  Vec seed(static_cast<Eigen::Index>(np));
  for (std::size_t c = 0; c < k; ++c) {
    const auto b = static_cast<Eigen::Index>(3 * c);
    seed(b) = peaks[c].amplitude;
    seed(b + 1) = peaks[c].frequency;
    seed(b + 2) = peaks[c].phase;
  }
  seed(tau_i + 1) = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  const LmOutcome lm = best_over_tau(seed, static_cast<std::size_t>(tau_i), span_of(t), n, fn,
                                     opts.max_iterations);
  FitResult res = to_result(model, names, lm);

  // Canonical form: positive amplitudes and frequencies, phases in (-pi, pi].
  for (std::size_t c = 0; c < k; ++c) {
    auto& amp = res.params[3 * c];
    auto& freq = res.params[3 * c + 1];
    auto& phase = res.params[3 * c + 2];
    if (freq.value < 0) {
      freq.value = -freq.value;
      phase.value = -phase.value;
    }
    if (amp.value < 0) {
      amp.value = -amp.value;
      phase.value += M_PI;
    }
    phase.value = std::remainder(phase.value, kTwoPi);
    if (!(amp.value > 2.0 * amp.sigma)) res.flags.push_back("degenerate-amplitude");
  }
  if (res.params[3 * k].value <= 0) res.flags.push_back("non-decaying");
  return res;
}

FitResult fit_damped_sinusoid(const std::vector<double>& t, const std::vector<double>& y,
                              const FitOptions& opts) {
  FitResult res = fit_multi_frequency(t, y, 1, opts);
  for (auto& p : res.params) {
    if (p.name == "amp_0") p.name = "amplitude";
    if (p.name == "freq_0") p.name = "freq";
    if (p.name == "phase_0") p.name = "phase";
  }
  return res;
}

// ---------------------------------------------------------------------------
// Avoided crossings

namespace {

struct ColumnFit {
  bool two_peaks = false;
  double f1 = 0, f2 = 0, w1 = 0, w2 = 0;
};

// Indices of local maxima, strongest first.
std::vector<std::size_t> local_maxima(const std::vector<double>& y, double threshold) {
  std::vector<std::size_t> idx;
  const std::size_t n = y.size();
  for (std::size_t k = 0; k < n; ++k) {
    const bool left = k == 0 || y[k] >= y[k - 1];
    const bool right = k + 1 == n || y[k] > y[k + 1];
    if (left && right && y[k] > threshold) idx.push_back(k);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  return idx;
}

double half_width_estimate(const std::vector<double>& f, const std::vector<double>& y,
                           std::size_t peak) {
  const double half = 0.5 * y[peak];
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && y[lo] > half) --lo;
  while (hi + 1 < y.size() && y[hi] > half) ++hi;
  const double step = f.size() > 1 ? std::abs(f[1] - f[0]) : 1.0;
  return std::max(step, 0.5 * std::abs(f[hi] - f[lo]));
}

ColumnFit fit_column(const std::vector<double>& f, std::vector<double> y) {
  ColumnFit out;
  const double base = median(y);
  for (auto& v : y) v -= base;
  const double top = *std::max_element(y.begin(), y.end());
  const double bottom = *std::min_element(y.begin(), y.end());
  if (-bottom > top) {
    for (auto& v : y) v = -v;
  }
  const double height = std::max(top, -bottom);
  if (!(height > 0)) return out;
  const auto peaks = local_maxima(y, 0.05 * height);
  if (peaks.size() < 2) return out;

  const std::size_t n = f.size();
  const std::size_t i1 = std::min(peaks[0], peaks[1]);
  const std::size_t i2 = std::max(peaks[0], peaks[1]);
  const ResidualFn fn = [&](const Vec& p, Vec& r) {
    for (std::size_t k = 0; k < n; ++k) {
      r(static_cast<Eigen::Index>(k)) = p(0) * lorentzian(f[k], p(1), p(2)) +
                                        p(3) * lorentzian(f[k], p(4), p(5)) + p(6) - y[k];
    }
  };
  Vec p0(7);
  p0 << y[i1], f[i1], half_width_estimate(f, y, i1), y[i2], f[i2], half_width_estimate(f, y, i2),
      0.0;
  const LmOutcome lm = least_squares(p0, n, fn, 200);
  const Vec& p = lm.p;
  const double fmin = std::min(f.front(), f.back());
  const double fmax = std::max(f.front(), f.back());
  const bool inside = p(1) >= fmin && p(1) <= fmax && p(4) >= fmin && p(4) <= fmax;
  if (!lm.p.allFinite() || !inside || p(0) <= 0 || p(3) <= 0) return out;
  out.two_peaks = true;
  out.f1 = std::min(p(1), p(4));
  out.f2 = std::max(p(1), p(4));
  out.w1 = std::abs(p(2));
  out.w2 = std::abs(p(5));
  return out;
}

// Hyperbolic fit gap(x) = sqrt(g0^2 + s^2 (x - x0)^2) around the minimum.
void refine_minimum(AvoidedCrossing& ac, const std::vector<double>& x, const std::vector<double>& gap) {
  const std::size_t n = x.size();
  const std::size_t imin = static_cast<std::size_t>(
      std::min_element(gap.begin(), gap.end()) - gap.begin());
  ac.gap_mhz = gap[imin];
  ac.location = x[imin];
  if (n < 4) return;

  // Window: the contiguous run around the minimum where the gap rises
  // monotonically and stays within 1.5x the minimum (a second crossing
  // elsewhere on the axis must not enter the fit); at least five points.
  const double limit = 1.5 * std::max(gap[imin], 1e-12);
  std::size_t lo = imin, hi = imin;
  while (lo > 0 && gap[lo - 1] <= limit && gap[lo - 1] >= gap[lo]) --lo;
  while (hi + 1 < n && gap[hi + 1] <= limit && gap[hi + 1] >= gap[hi]) ++hi;
  // Densely sampled branches: keep the fit local, where a hyperbola in the
  // control variable is accurate even for curved bare lines.
  while (hi - lo + 1 > 9) {
    if (imin - lo > hi - imin) {
      ++lo;
    } else {
      --hi;
    }
  }
  while (hi - lo + 1 < 5 && (lo > 0 || hi + 1 < n)) {
    if (lo > 0) --lo;
    if (hi - lo + 1 < 5 && hi + 1 < n) ++hi;
  }
  std::vector<std::size_t> sel;
  for (std::size_t k = lo; k <= hi; ++k) sel.push_back(k);
  double slope = 0.0;
  std::size_t cnt = 0;
  for (std::size_t k : sel) {
    const double dx = x[k] - x[imin];
    if (dx == 0.0) continue;
    slope += std::sqrt(std::max(0.0, gap[k] * gap[k] - gap[imin] * gap[imin])) / std::abs(dx);
    ++cnt;
  }
  if (cnt == 0 || slope == 0.0) return;
  slope /= static_cast<double>(cnt);

  const ResidualFn fn = [&](const Vec& p, Vec& r) {
    for (std::size_t s = 0; s < sel.size(); ++s) {
      const double dx = x[sel[s]] - p(1);
      r(static_cast<Eigen::Index>(s)) = std::sqrt(p(0) * p(0) + p(2) * p(2) * dx * dx) - gap[sel[s]];
    }
  };
  Vec p0(3);
  p0 << gap[imin], x[imin], slope;
  const LmOutcome lm = least_squares(p0, sel.size(), fn, 200);
  const double xlo = *std::min_element(x.begin(), x.end());
  const double xhi = *std::max_element(x.begin(), x.end());
  if (lm.p.allFinite() && lm.p(1) >= xlo && lm.p(1) <= xhi && std::abs(lm.p(0)) <= gap[imin]) {
    ac.gap_mhz = std::abs(lm.p(0));
    ac.location = lm.p(1);
  }
}

}  // namespace

AvoidedCrossing extract_avoided_crossing(const SweepResult& sweep, const std::string& field) {
  double to_mhz = 0.0;
  if (sweep.axis2.unit == "GHz") to_mhz = 1000.0;
  else if (sweep.axis2.unit == "MHz") to_mhz = 1.0;
  else throw Error(ErrorKind::Fit, "frequency axis must be in GHz or MHz, got '" + sweep.axis2.unit + "'");
  if (sweep.size2() < 8) throw Error(ErrorKind::Fit, "frequency axis too short for line fits");

  const auto& data = sweep.field(field);
  std::vector<double> f(sweep.size2());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = sweep.axis2.values[k] * to_mhz;

  AvoidedCrossing ac;
  std::vector<double> xs, gaps, widths;
  for (std::size_t i = 0; i < sweep.size1(); ++i) {
    std::vector<double> col(sweep.size2());
    bool finite = true;
    for (std::size_t k = 0; k < col.size(); ++k) {
      col[k] = data[sweep.index(i, k)];
      finite = finite && std::isfinite(col[k]);
    }
    BranchPoint bp;
    bp.control = sweep.axis1.values[i];
    if (finite) {
      const ColumnFit cf = fit_column(f, col);
      if (cf.two_peaks) {
        bp.lower = cf.f1;
        bp.upper = cf.f2;
        bp.linewidth = 0.5 * (cf.w1 + cf.w2);
        bp.resolved = true;
        xs.push_back(bp.control);
        gaps.push_back(cf.f2 - cf.f1);
        widths.push_back(bp.linewidth);
      }
    }
    ac.branches.push_back(bp);
  }

  if (xs.size() < 3) {
    ac.flagged = true;
    ac.message = "fewer than three columns resolve two lines; gap below resolution";
    ac.gap_mhz = ac.half_gap_mhz = kNaN;
    return ac;
  }
  refine_minimum(ac, xs, gaps);
  ac.half_gap_mhz = 0.5 * ac.gap_mhz;
  ac.linewidth_mhz = median(widths);
  if (ac.gap_mhz < 2.0 * ac.linewidth_mhz) {
    ac.flagged = true;
    ac.message = "branches closer than two linewidths; gap below resolution";
  }
  return ac;
}

AvoidedCrossing min_branch_separation(const std::vector<double>& control,
                                      const std::vector<double>& lower_mhz,
                                      const std::vector<double>& upper_mhz) {
  if (control.size() != lower_mhz.size() || control.size() != upper_mhz.size() || control.empty()) {
    throw Error(ErrorKind::Fit, "branch series must be non-empty and equally long");
  }
  AvoidedCrossing ac;
  std::vector<double> gaps(control.size());
  for (std::size_t k = 0; k < control.size(); ++k) {
    gaps[k] = upper_mhz[k] - lower_mhz[k];
    ac.branches.push_back({control[k], lower_mhz[k], upper_mhz[k], 0.0, true});
  }
  refine_minimum(ac, control, gaps);
  ac.half_gap_mhz = 0.5 * ac.gap_mhz;
  if (control.size() < 4) {
    ac.flagged = true;
    ac.message = "too few points to refine the minimum";
  }
  return ac;
}

// ---------------------------------------------------------------------------
// Dressed spectrum

DressedSpectrum dressed_spectrum(const SystemSpec& spec) {
  const Operator h = build_static_hamiltonian(spec);
  const EigenSystem es = eigensystem_hermitian(h);
  const std::size_t dim = h.dim();

  // Greedy maximum-overlap matching between eigenvectors and bare states.
  struct Pair {
    double w;
    std::size_t eig, bare;
  };
  std::vector<Pair> pairs;
  pairs.reserve(dim * dim);
  for (std::size_t e = 0; e < dim; ++e)
    for (std::size_t b = 0; b < dim; ++b)
      pairs.push_back({std::norm(es.vectors(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e))), e, b});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) { return l.w > r.w; });

  DressedSpectrum ds;
  ds.space = h.space();
  ds.energies_mhz.assign(dim, kNaN);
  ds.bare_overlap.assign(dim, 0.0);
  ds.states = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::vector<bool> eig_used(dim, false), bare_used(dim, false);
  std::size_t assigned = 0;
  for (const auto& p : pairs) {
    if (assigned == dim) break;
    if (eig_used[p.eig] || bare_used[p.bare]) continue;
    eig_used[p.eig] = bare_used[p.bare] = true;
    ds.energies_mhz[p.bare] = es.values[p.eig] / kTwoPi;
    ds.bare_overlap[p.bare] = p.w;
    ds.states.col(static_cast<Eigen::Index>(p.bare)) = es.vectors.col(static_cast<Eigen::Index>(p.eig));
    ++assigned;
  }
  return ds;
}

double DressedSpectrum::energy(const std::vector<std::size_t>& digits) const {
  return energies_mhz.at(space.index_of(digits));
}

double DressedSpectrum::transition(const std::vector<std::size_t>& from,
                                   const std::vector<std::size_t>& to) const {
  return energy(to) - energy(from);
}

double DressedSpectrum::qubit_character(const std::vector<std::size_t>& digits, std::size_t q) const {
  const auto col = states.col(static_cast<Eigen::Index>(space.index_of(digits)));
  double w = 0.0;
  for (std::size_t i = 0; i < space.total_dim(); ++i) {
    if (space.digits_of(i)[qubit_slot(q)] == 1) w += std::norm(col(static_cast<Eigen::Index>(i)));
  }
  return w;
}

double zz_shift_mhz(const SystemSpec& spec, std::size_t qa, std::size_t qb) {
  const std::size_t nq = spec.qubits.size();
  if (qa >= nq || qb >= nq || qa == qb) throw Error(ErrorKind::InvalidSpec, "invalid qubit pair");
  const DressedSpectrum ds = dressed_spectrum(spec);
  auto label = [&](bool ea, bool eb) {
    std::vector<std::size_t> d(nq + 1, 0);
    d[qubit_slot(qa)] = ea;
    d[qubit_slot(qb)] = eb;
    return ds.energy(d);
  };
  return label(true, true) - label(true, false) - label(false, true) + label(false, false);
}

}  // namespace neoqed
