// Acceptance checks for the physics targets. Prints one PASS/FAIL line per
// criterion; tolerances are fixed below. With --expect-fail the exit code is 0
// exactly when the failing set equals the listed one (known, documented
// deviations), otherwise it is 0 only if every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "neoqed/analysis.hpp"
#include "neoqed/config.hpp"
#include "neoqed/dynamics.hpp"
#include "neoqed/io.hpp"
#include "neoqed/protocols.hpp"
#include "neoqed/runner.hpp"

using namespace neoqed;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  json data = json::object();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig config_file(const std::string& name) {
  return load_config(std::string(NEOQED_CONFIG_DIR) + "/" + name);
}

bool within_rel(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

// ---------------------------------------------------------------------------
// 1. Dispersive shift

constexpr double kChiPaper = 0.33;   // MHz
constexpr double kChiRelTol = 0.03;

Outcome dispersive_shift() {
  const double chi = oracle_dispersive_shift(3.76, 43.0);
  // Numerical cross-check: resonator pull between Q_b ground and excited.
  const SystemSpec spec = load_preset("two_qubit_tableS1").system_spec().with_cutoff(4);
  const DressedSpectrum d = dressed_spectrum(spec);
  const double pull = (d.transition({0, 0, 0}, {1, 0, 0}) - d.transition({0, 1, 0}, {1, 1, 0})) / 2.0;
  Outcome o;
  o.pass = within_rel(chi, kChiPaper, kChiRelTol);
  o.detail = fmt("chi = %.4f MHz (target %.2f +- %.0f%%); dressed-spectrum pull %.4f MHz", chi, kChiPaper,
                 kChiRelTol * 100, pull);
  o.data = {{"chi_mhz", chi}, {"dressed_pull_mhz", pull}};
  return o;
}

// ---------------------------------------------------------------------------
// 2. Readout-induced swap

constexpr double kSwapNbarMin = 20.0;
constexpr double kSwapNbarRelTol = 0.20;

Outcome readout_swap_regimes() {
  const ExperimentConfig cfg = config_file("readout_swap.yaml");
  const SystemSpec spec = cfg.system_spec();
  const double delta_b = (spec.qubits[0].omega - spec.resonator.omega).in_mhz();
  const double delta_bd = (spec.qubits[1].omega - spec.qubits[0].omega).in_mhz();
  const double n_star = oracle_swap_threshold(delta_bd, oracle_dispersive_shift(spec.qubits[0].g.in_mhz(), delta_b));
  const RunResult r = run_experiment(cfg);
  const json& runs = r.analysis.at("readout_swap");
  const json *strong = nullptr, *weak = nullptr;
  for (const auto& run : runs) {
    const double eps = run.at("epsilon_mhz").get<double>();
    if (std::abs(eps - 18.0) < 1e-6) strong = &run;
    if (std::abs(eps - 5.6) < 1e-6) weak = &run;
  }
  Outcome o;
  if (!strong || !weak) {
    o.detail = "config lacks the 5.6 / 18 MHz probes";
    return o;
  }
  const double peak = strong->at("peak_n_bar").get<double>();
  const bool crossed = strong->at("crossed").get<bool>();
  const bool weak_crossed = weak->at("crossed").get<bool>();
  o.pass = crossed && !weak_crossed && peak > kSwapNbarMin && within_rel(peak, n_star, kSwapNbarRelTol);
  o.detail = fmt("eps=18: crossed=%s at %.3f us, peak n=%.2f (n*=%.2f, +-%.0f%%); eps=5.6: crossed=%s",
                 crossed ? "yes" : "no", crossed ? strong->at("crossing_time_us").get<double>() : 0.0, peak,
                 n_star, kSwapNbarRelTol * 100, weak_crossed ? "yes" : "no");
  o.data = {{"n_star", n_star}, {"runs", runs}};
  return o;
}

// ---------------------------------------------------------------------------
// 3. CR / bSWAP pi-times under one drive calibration

constexpr double kCrCarrierGhz = 5.726;
constexpr double kCrPiTarget = 0.8;
constexpr double kCrPiRelTol = 0.10;
constexpr double kBswapCarrierGhz = 5.718;
constexpr double kBswapPiTarget = 2.0;
constexpr double kBswapPiRelTol = 0.25;

// First P_d maximum (at least half the column maximum) versus Gaussian pulse
// length, parabolically refined. Returns 0 if none is found.
double first_maximum(const std::vector<double>& x, const std::vector<double>& y) {
  const double top = *std::max_element(y.begin(), y.end());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (y[i] >= 0.5 * top && y[i] > y[i - 1] && y[i] >= y[i + 1]) {
      const double h = x[i + 1] - x[i];
      const double den = y[i - 1] - 2 * y[i] + y[i + 1];
      return den < 0 ? x[i] + 0.5 * h * (y[i - 1] - y[i + 1]) / den : x[i];
    }
  }
  return 0.0;
}

struct LengthColumns {
  SweepResult sweep;
  std::vector<double> lengths;
};

LengthColumns gaussian_columns(const ExperimentConfig& cfg, const std::vector<double>& freqs, double amp,
                               double l_max, double dl) {
  RabiLengthConfig rc;
  rc.drive_freqs_ghz = freqs;
  for (double l = dl; l <= l_max + 1e-9; l += dl) rc.lengths_us.push_back(l);
  rc.amplitude_mhz = amp;
  rc.shape = EnvelopeShape::Gaussian;
  rc.run = cfg.run_options();
  return {rabi_length_frequency(cfg.system_spec(), rc), rc.lengths_us};
}

double pi_time(const LengthColumns& c, std::size_t column) {
  std::vector<double> y(c.lengths.size());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = c.sweep.at("p_d", column, j);
  return first_maximum(c.lengths, y);
}

Outcome cr_bswap_anchor() {
  const ExperimentConfig cfg = load_preset("two_qubit_tableS1");
  const auto& p = std::get<RabiLengthProtocol>(cfg.protocol);
  const double preset_amp = cfg.drive_mhz(p.amplitude);
  // Fixed-point calibration: the Gaussian pulse area scales as A * length.
  double amp = preset_amp, t_cr = 0.0;
  for (int it = 0; it < 6; ++it) {
    t_cr = pi_time(gaussian_columns(cfg, {kCrCarrierGhz}, amp, 1.6, 0.01), 0);
    if (t_cr <= 0) break;
    if (std::abs(t_cr - kCrPiTarget) < 2e-3) break;
    amp *= t_cr / kCrPiTarget;
  }
  // bSWAP line centre at the calibrated amplitude: carrier with the largest P_d.
  std::vector<double> freqs;
  for (int k = -5; k <= 5; ++k) freqs.push_back(kBswapCarrierGhz + 1e-4 * k);
  const LengthColumns scan = gaussian_columns(cfg, freqs, amp, 3.0, 0.025);
  std::size_t best = 0;
  double best_p = -1;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    for (std::size_t j = 0; j < scan.lengths.size(); ++j) {
      if (scan.sweep.at("p_d", i, j) > best_p) {
        best_p = scan.sweep.at("p_d", i, j);
        best = i;
      }
    }
  }
  const LengthColumns fine = gaussian_columns(cfg, {freqs[best], kBswapCarrierGhz}, amp, 3.0, 0.01);
  const double t_bswap = pi_time(fine, 0);
  const double t_literal = pi_time(fine, 1);
  Outcome o;
  o.pass = within_rel(t_cr, kCrPiTarget, kCrPiRelTol) && within_rel(t_bswap, kBswapPiTarget, kBswapPiRelTol);
  o.detail = fmt("A_pk = %.3f MHz (preset %.3f): CR pi %.3f us (target %.1f +-%.0f%%); bSWAP line centre %.5f GHz "
                 "pi %.3f us (target %.1f +-%.0f%%); at %.3f GHz exactly: %.3f us",
                 amp, preset_amp, t_cr, kCrPiTarget, kCrPiRelTol * 100, freqs[best], t_bswap, kBswapPiTarget,
                 kBswapPiRelTol * 100, kBswapCarrierGhz, t_literal);
  o.data = {{"amplitude_mhz", amp},      {"preset_amplitude_mhz", preset_amp}, {"cr_pi_us", t_cr},
            {"bswap_carrier_ghz", freqs[best]}, {"bswap_pi_us", t_bswap},     {"bswap_pi_literal_us", t_literal}};
  return o;
}

// ---------------------------------------------------------------------------
// 4. Square-pulse oscillation frequencies against the closed forms

constexpr double kCrRelTol = 0.10;
constexpr double kBswapRelTol = 0.15;

// Square pulse at the resonant carrier; fitted P_d oscillation frequency.
double square_rabi_frequency(const ExperimentConfig& cfg, Frequency carrier, double amp, double expected) {
  RabiLengthConfig rc;
  rc.drive_freqs_ghz = {carrier.in_ghz()};
  const double t_end = 2.5 / expected;
  for (std::size_t k = 0; k <= 150; ++k) rc.lengths_us.push_back(t_end * static_cast<double>(k) / 150.0);
  rc.amplitude_mhz = amp;
  rc.shape = EnvelopeShape::Square;
  rc.run = cfg.run_options();
  const SweepResult s = rabi_length_frequency(cfg.system_spec(), rc);
  std::vector<double> y(rc.lengths_us.size());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = s.at("p_d", 0, j);
  return fit_damped_sinusoid(rc.lengths_us, y).value("freq");
}

Outcome oracle_consistency() {
  const ExperimentConfig cfg = load_preset("two_qubit_tableS1");
  const SystemSpec spec = cfg.system_spec();
  const double j = spec.couplings[0].strength.in_mhz();
  const double delta = (spec.qubits[1].omega - spec.qubits[0].omega).in_mhz();
  Outcome o;
  o.pass = true;
  std::ostringstream detail;
  auto check = [&](const char* label, double amp, double oracle, double tol, const std::vector<std::size_t>& to,
                   double lo, double hi) {
    const DriveResonance r =
        find_drive_resonance(spec, amp, {0, 0, 0}, to, Frequency::ghz(lo), Frequency::ghz(hi));
    const double sim = square_rabi_frequency(cfg, r.carrier, amp, oracle);
    const double dev = sim / oracle - 1.0;
    const bool ok = std::abs(dev) <= tol;
    o.pass = o.pass && ok;
    detail << fmt("%s A=%g: %.4f vs %.4f MHz (%+.1f%%%s) ", label, amp, sim, oracle, dev * 100, ok ? "" : ", out");
    o.data[fmt("%s_%g", label, amp)] = {{"simulated_mhz", sim},
                                        {"quasi_energy_mhz", r.rabi_mhz},
                                        {"oracle_mhz", oracle},
                                        {"carrier_ghz", r.carrier.in_ghz()}};
  };
  for (double a : {1.0, 2.0, 4.0}) {
    check("CR", a, oracle_cr_frequency(a, j, delta), kCrRelTol, {0, 0, 1}, 5.7235, 5.7285);
  }
  for (double a : {5.0, 8.0}) {
    check("bSWAP", a, oracle_bswap_frequency(a, j, delta), kBswapRelTol, {0, 1, 1}, 5.714, 5.721);
  }
  o.detail = detail.str() + fmt("(tolerances %.0f%% / %.0f%%)", kCrRelTol * 100, kBswapRelTol * 100);
  return o;
}

// ---------------------------------------------------------------------------
// 5. Avoided crossing in two-tone spectroscopy

constexpr double kCouplingTarget = 3.35;  // MHz
constexpr double kCouplingTol = 0.1;

Outcome avoided_crossing() {
  const RunResult r = run_experiment(config_file("two_tone_crossing.yaml"));
  Outcome o;
  if (!r.analysis.contains("avoided_crossing")) {
    o.detail = "extraction failed: " + r.analysis.value("avoided_crossing_error", std::string("?"));
    return o;
  }
  const json& c = r.analysis["avoided_crossing"];
  const double gap = c["gap_mhz"], half = c["half_gap_mhz"];
  const bool flagged = c["flagged"];
  const bool half_ok = std::abs(half - kCouplingTarget) <= kCouplingTol;
  const bool gap_ok = std::abs(gap - kCouplingTarget) <= kCouplingTol;
  o.pass = !flagged && (half_ok || gap_ok);
  o.detail = fmt("gap %.3f MHz, gap/2 %.3f MHz at dV %.3f mV, linewidth %.3f MHz%s; target %.2f +- %.1f via %s "
                 "(%zu cells, %.0f s)",
                 gap, half, c["location"].get<double>(), c["linewidth_mhz"].get<double>(), flagged ? ", FLAGGED" : "",
                 kCouplingTarget, kCouplingTol, half_ok ? "gap/2" : gap_ok ? "gap" : "neither",
                 r.sweep ? r.sweep->cells() : 0, r.wall_time_s);
  o.data = c;
  return o;
}

// ---------------------------------------------------------------------------
// 6. Three-qubit eigen-diagram

constexpr double kSweetSpotTolMhz = 2.0;
constexpr double kPairJ = 62.5;
constexpr double kPairJTol = 1.0;
constexpr double kPairLocation = 0.74;  // mV
constexpr double kPairLocationTol = 0.1;

Outcome eigen_diagram_check() {
  const ExperimentConfig cfg = load_preset("three_qubit_tableS2");
  const RunResult r = run_experiment(cfg);
  const GateVoltageModel gates = cfg.gate_voltage_model();
  Outcome o;
  o.pass = true;
  std::ostringstream detail;
  for (const auto& s : r.analysis["sweet_spots"]) {
    const std::size_t q = cfg.system_spec().qubit_index(s["qubit"]);
    const double target = gates.qubits[q].alpha_ghz;
    const double got = s["branch_ghz"];
    const bool ok = std::abs(got - target) * 1e3 <= kSweetSpotTolMhz;
    o.pass = o.pass && ok;
    detail << fmt("%s %.4f GHz (vs %.3f%s); ", s["qubit"].get<std::string>().c_str(), got, target, ok ? "" : ", out");
  }
  // The positive-bias Q1-Q2 anticrossing.
  const auto& p = std::get<EigenDiagramProtocol>(cfg.protocol);
  std::vector<double> dv;
  for (double v : p.dv_mv.values()) {
    if (v > 0) dv.push_back(v);
  }
  const SystemSpec spec = cfg.system_spec();
  const BranchPair bp = branch_pair(gates, spec.couplings, dv, spec.qubit_index(p.pair_a), spec.qubit_index(p.pair_b));
  std::vector<double> lo(dv.size()), hi(dv.size());
  for (std::size_t k = 0; k < dv.size(); ++k) {
    lo[k] = bp.lower_ghz[k] * 1e3;
    hi[k] = bp.upper_ghz[k] * 1e3;
  }
  const AvoidedCrossing c = min_branch_separation(dv, lo, hi);
  const bool j_ok = std::abs(c.half_gap_mhz - kPairJ) <= kPairJTol;
  const bool x_ok = std::abs(c.location - kPairLocation) <= kPairLocationTol;
  o.pass = o.pass && j_ok && x_ok;
  detail << fmt("Q1-Q2 gap/2 %.3f MHz (vs %.1f +- %.0f) at dV %.3f mV (vs %.2f +- %.1f)", c.half_gap_mhz, kPairJ,
                kPairJTol, c.location, kPairLocation, kPairLocationTol);
  o.detail = detail.str();
  o.data = {{"sweet_spots", r.analysis["sweet_spots"]},
            {"pair_half_gap_mhz", c.half_gap_mhz},
            {"pair_location_mv", c.location}};
  return o;
}

// ---------------------------------------------------------------------------
// 7. Decoherence round trip

constexpr double kT1b = 1.81, kT1d = 30.0;  // us
constexpr double kT1RelTol = 0.05;
constexpr double kBeatResidual = 0.02;  // rms residual / fringe amplitude

Outcome decoherence_round_trip() {
  const RunResult rb = run_experiment(config_file("relaxation_qb.yaml"));
  const RunResult rd = run_experiment(config_file("relaxation_qd.yaml"));
  const double t1b = rb.analysis.at("t1_us"), t1d = rd.analysis.at("t1_us");
  const RunResult ram = run_experiment(config_file("ramsey_qd.yaml"));
  const Trajectory& tr = ram.trajectories.at(0).second;
  const FitResult f = fit_damped_sinusoid(tr.times, tr.series[0]);
  const double rms = f.residual_norm / std::sqrt(static_cast<double>(tr.times.size()));
  const double rel = rms / std::abs(f.value("amplitude"));
  const bool b_ok = within_rel(t1b, kT1b, kT1RelTol);
  const bool d_ok = within_rel(t1d, kT1d, kT1RelTol);
  const bool ramsey_ok = rel < kBeatResidual;
  Outcome o;
  o.pass = b_ok && d_ok && ramsey_ok;
  o.detail = fmt("T1(Q_b) %.3f us (vs %.2f%s), T1(Q_d) %.2f us (vs %.1f%s), +-%.0f%%; Ramsey Q_d single-tone "
                 "residual %.4f of amplitude (< %.2f), fringe %.4f MHz, T2 %.1f us",
                 t1b, kT1b, b_ok ? "" : ", out", t1d, kT1d, d_ok ? "" : ", out", kT1RelTol * 100, rel, kBeatResidual,
                 f.value("freq"), f.value("tau"));
  o.data = {{"t1_b_us", t1b}, {"t1_d_us", t1d}, {"ramsey_residual", rel}, {"ramsey_t2_us", f.value("tau")}};
  return o;
}

// ---------------------------------------------------------------------------
// 8. ZZ null

constexpr double kZzTol = 0.05;  // MHz

Outcome zz_null() {
  const SystemSpec spec = load_preset("two_qubit_tableS1").system_spec();
  const double zz = zz_shift_mhz(spec, 0, 1);
  Outcome o;
  o.pass = std::abs(zz) < kZzTol;
  o.detail = fmt("|w11 - w01 - w10| = %.2e MHz (< %.2f)", std::abs(zz), kZzTol);
  o.data = {{"zz_mhz", zz}};
  return o;
}

// ---------------------------------------------------------------------------
// 9. Waterfall contrast

constexpr double kBandLo = 5.713, kBandHi = 5.718;  // GHz
constexpr double kProminence = 0.1;
constexpr std::size_t kMinReversals = 3;
constexpr double kLineSearchMax = 5.7215;  // GHz, below the CR line
constexpr double kLineVisible = 0.2;       // P_d peak that makes the line measurable
constexpr double kMinRedShiftMhz = 1.0;

// Local maxima with at least the given topographic prominence.
std::size_t count_maxima(const std::vector<double>& y, double min_prominence) {
  std::size_t n = 0;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    double left = y[i], right = y[i];
    for (std::size_t j = i; j-- > 0;) {
      if (y[j] > y[i]) break;
      left = std::min(left, y[j]);
    }
    for (std::size_t j = i + 1; j < y.size(); ++j) {
      if (y[j] > y[i]) break;
      right = std::min(right, y[j]);
    }
    if (y[i] - std::max(left, right) >= min_prominence) ++n;
  }
  return n;
}

struct WaterfallStats {
  double median_reversals = 0.0;
  double red_shift_mhz = 0.0;
  double line_low_ghz = 0.0, line_top_ghz = 0.0;
  double reference_amplitude = 0.0;
  double wall_s = 0.0;
};

WaterfallStats waterfall(const std::string& file) {
  const RunResult r = run_experiment(config_file(file));
  const SweepResult& s = *r.sweep;
  const auto& f = s.axis1.values;
  std::vector<double> counts;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < kBandLo - 1e-9 || f[i] > kBandHi + 1e-9) continue;
    std::vector<double> y(s.size2());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = s.at("p_d", i, j);
    counts.push_back(static_cast<double>(count_maxima(y, kProminence)));
  }
  std::sort(counts.begin(), counts.end());
  WaterfallStats w;
  const std::size_t m = counts.size();
  w.median_reversals = m == 0 ? 0.0 : (m % 2 ? counts[m / 2] : 0.5 * (counts[m / 2 - 1] + counts[m / 2]));
  // Line centre = P_d maximum below the CR line. The two-photon line grows as
  // A^4, so the reference is the weakest amplitude at which it is visible.
  auto line = [&](std::size_t j) {
    double best = -1, at = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] < kLineSearchMax && s.at("p_d", i, j) > best) {
        best = s.at("p_d", i, j);
        at = f[i];
      }
    }
    return std::make_pair(at, best);
  };
  std::size_t ref = 1;
  while (ref + 1 < s.size2() && line(ref).second < kLineVisible) ++ref;
  w.reference_amplitude = s.axis2.values[ref];
  w.line_low_ghz = line(ref).first;
  w.line_top_ghz = line(s.size2() - 1).first;
  w.red_shift_mhz = (w.line_low_ghz - w.line_top_ghz) * 1e3;
  w.wall_s = r.wall_time_s;
  return w;
}

Outcome waterfall_contrast() {
  const WaterfallStats g = waterfall("waterfall_gaussian.yaml");
  const WaterfallStats sq = waterfall("waterfall_square.yaml");
  Outcome o;
  const bool g_ok = g.median_reversals >= kMinReversals;
  const bool sq_ok = sq.median_reversals == 0.0;
  const bool shift_ok = sq.red_shift_mhz > kMinRedShiftMhz;
  o.pass = g_ok && sq_ok && shift_ok;
  o.detail = fmt("median P_d maxima in %.3f-%.3f GHz: gaussian %.1f (>= %zu%s), square %.1f (== 0%s); square line "
                 "centre %.4f (A=%.2f MHz) -> %.4f GHz, red shift %.2f MHz (> %.0f%s); gaussian shift %.2f MHz (%.0f + %.0f s)",
                 kBandLo, kBandHi, g.median_reversals, kMinReversals, g_ok ? "" : ", out", sq.median_reversals,
                 sq_ok ? "" : ", out", sq.line_low_ghz, sq.reference_amplitude, sq.line_top_ghz, sq.red_shift_mhz, kMinRedShiftMhz,
                 shift_ok ? "" : ", out", g.red_shift_mhz, g.wall_s, sq.wall_s);
  o.data = {{"gaussian_reversals", g.median_reversals},
            {"square_reversals", sq.median_reversals},
            {"square_red_shift_mhz", sq.red_shift_mhz},
            {"gaussian_red_shift_mhz", g.red_shift_mhz}};
  return o;
}

// ---------------------------------------------------------------------------
// 10. Numerical property suite on every preset

constexpr double kTraceTol = 1e-8;
constexpr double kPositivityTol = -1e-7;
constexpr double kConservationTol = 1e-8;
constexpr double kMinHalvingRatio = 8.0;  // RK4: ideally 16

double max_series_diff(const Trajectory& a, const Trajectory& b) {
  double d = 0;
  for (std::size_t k = 0; k < a.series.size(); ++k) {
    for (std::size_t s = 0; s < a.series[k].size(); ++s) d = std::max(d, std::abs(a.series[k][s] - b.series[k][s]));
  }
  return d;
}

Outcome property_suite() {
  Outcome o;
  o.pass = true;
  std::ostringstream detail;
  for (const auto& name : preset_names()) {
    const SystemSpec spec = load_preset(name).system_spec();
    const Frame frame = Frame::rotating(spec.qubits[0].omega);
    const auto obs = standard_observables(spec);

    // Driven, dissipative evolution: trace and positivity.
    DriveSpec d;
    d.envelope = PulseEnvelope::gaussian(4.0, 0.8);
    d.carrier = spec.qubits.back().omega;
    const auto h = build_time_dependent_hamiltonian(spec, {d}, frame);
    const auto c = build_collapse_operators(spec);
    IntegratorConfig cfg;
    cfg.t_end_us = 2.0;
    cfg.sample_times_us = IntegratorConfig::uniform_samples(2.0, 40);
    const Trajectory open = evolve(product_state(spec, {0}), h, c, cfg, obs);

    // Closed system: energy and excitation number.
    SystemSpec closed = spec;
    closed.resonator.kappa = Frequency::mhz(0.0);
    for (auto& q : closed.qubits) q.gamma1 = q.gamma_phi = Frequency::mhz(0.0);
    const TimeDependentHamiltonian h0{build_hamiltonian_in(closed, frame), {}};
    IntegratorConfig tight = cfg;
    tight.t_end_us = 5.0;
    tight.sample_times_us = IntegratorConfig::uniform_samples(5.0, 50);
    tight.rel_tol = 1e-10;
    tight.abs_tol = 1e-12;
    const Trajectory cl = evolve(product_state(closed, {0}), h0, build_collapse_operators(closed), tight,
                                 {{"energy", h0.static_part}, {"n_exc", excitation_number(closed)}});
    double de = 0, dn = 0;
    const auto& e = cl.get("energy");
    const auto& n = cl.get("n_exc");
    for (std::size_t k = 0; k < e.size(); ++k) {
      de = std::max(de, std::abs(e[k] - e[0]) / std::abs(e[0]));
      dn = std::max(dn, std::abs(n[k] - n[0]));
    }

    // Step halving with fixed-step RK4 on the driven open system, starting
    // from a step well inside the stability region of the frame spectrum.
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Matrix>(h.static_part.matrix()).eigenvalues();
    const double dt0 = 0.1 / (ev.maxCoeff() - ev.minCoeff());
    IntegratorConfig rk = cfg;
    rk.method = IntegratorMethod::FixedRk4;
    rk.t_end_us = 0.8;
    rk.sample_times_us = IntegratorConfig::uniform_samples(0.8, 8);
    std::vector<Trajectory> runs;
    for (double dt : {dt0, dt0 / 2, dt0 / 4}) {
      rk.dt_us = dt;
      runs.push_back(evolve(product_state(spec, {0}), h, c, rk, obs));
    }
    const double d1 = max_series_diff(runs[0], runs[1]), d2 = max_series_diff(runs[1], runs[2]);
    const double ratio = d2 > 0 ? d1 / d2 : INFINITY;
    const bool halving_ok = ratio >= kMinHalvingRatio || d1 < 1e-12;

    const bool ok = open.max_trace_drift < kTraceTol && open.min_eigenvalue >= kPositivityTol &&
                    de < kConservationTol && dn < kConservationTol && halving_ok;
    o.pass = o.pass && ok;
    detail << fmt("%s: trace %.1e, min eig %.1e, dE/E %.1e, dN %.1e, halving ratio %.1f (dt %.1e us)%s; ",
                  name.c_str(), open.max_trace_drift, open.min_eigenvalue, de, dn, ratio, dt0, ok ? "" : " OUT");
    o.data[name] = {{"trace_drift", open.max_trace_drift}, {"min_eigenvalue", open.min_eigenvalue},
                    {"energy_rel_drift", de},              {"excitation_drift", dn},
                    {"halving_ratio", ratio},              {"halving_dt_us", dt0}};
  }
  o.detail = detail.str();
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only, expect_fail;
  std::string report_path;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Known failing criteria; exit 0 iff exactly these fail")
      ->delimiter(',');
  app.add_option("--report", report_path, "Write a JSON report here");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "dispersive shift", dispersive_shift},
      {2, "readout swap", readout_swap_regimes},
      {3, "CR / bSWAP pi-times", cr_bswap_anchor},
      {4, "oracle consistency", oracle_consistency},
      {5, "avoided crossing", avoided_crossing},
      {6, "three-qubit eigen-diagram", eigen_diagram_check},
      {7, "decoherence round trip", decoherence_round_trip},
      {8, "ZZ null", zz_null},
      {9, "waterfall contrast", waterfall_contrast},
      {10, "property suite", property_suite},
  };

  std::set<int> failed, ran;
  json report = json::array();
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ran.insert(c.id);
    if (!o.pass) failed.insert(c.id);
    std::printf("criterion %2d %-26s %s  %s [%.1f s]\n", c.id, c.title, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                secs);
    std::fflush(stdout);
    report.push_back({{"criterion", c.id}, {"title", c.title}, {"pass", o.pass}, {"detail", o.detail},
                      {"seconds", secs}, {"data", o.data}});
  }
  if (!report_path.empty()) write_file_atomic(report_path, report.dump(2) + "\n");

  std::printf("%zu/%zu criteria pass\n", ran.size() - failed.size(), ran.size());
  if (expect_fail.empty()) return failed.empty() ? 0 : 1;
  std::set<int> expected;
  for (int id : expect_fail) {
    if (ran.count(id)) expected.insert(id);
  }
  if (failed != expected) {
    std::printf("failing set differs from the documented deviations\n");
    return 1;
  }
  return 0;
}
