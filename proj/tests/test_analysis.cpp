#include <cmath>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "neoqed/analysis.hpp"

using namespace neoqed;
using neoqed::testing::two_qubit_spec;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = a + (b - a) * static_cast<double>(k) / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("closed-form oracles") {
  CHECK(oracle_dispersive_shift(3.76, 43.0) == doctest::Approx(0.32878139534883723));
  CHECK_THROWS_AS(oracle_dispersive_shift(3.76, 0.0), Error);
  // Frozen: 2.96 * 3.35 / (14.3 + 2 * 3.35^2 / 14.3)
  CHECK(oracle_cr_frequency(2.96, 3.35, 14.3) == doctest::Approx(0.6248432370502567).epsilon(1e-12));
  CHECK(oracle_cr_amplitude(0.6248432370502567, 3.35, 14.3) == doctest::Approx(2.96).epsilon(1e-12));
  // Frozen: a 0.25 MHz bSWAP (pi in 2 us) needs A = 3.0655 MHz.
  CHECK(oracle_bswap_amplitude(0.25, 3.35, 14.3) == doctest::Approx(3.065476897314274).epsilon(1e-12));
  CHECK(oracle_bswap_frequency(8.0, 3.35, 14.3) ==
        doctest::Approx(4.0 * oracle_bswap_frequency(4.0, 3.35, 14.3)));
  CHECK(oracle_bswap_frequency(oracle_bswap_amplitude(0.5, 3.35, 14.3), 3.35, 14.3) ==
        doctest::Approx(0.5));
  CHECK(oracle_swap_frequency(14.3, 3.35) == doctest::Approx(15.7918).epsilon(1e-5));
  CHECK(oracle_virtual_exchange(3.76, 0.1, 43.0, 57.5) == doctest::Approx(0.0076414).epsilon(1e-4));
  CHECK(oracle_ac_stark(10.0, 0.3288) == doctest::Approx(6.576));
  CHECK(oracle_swap_threshold(14.3, 0.3288) == doctest::Approx(21.746).epsilon(1e-4));
}

TEST_CASE("exponential fit recovers T1 from noisy data") {
  const auto t = linspace(0.0, 10.0, 201);
  std::vector<double> tau_hat;
  std::size_t within_3sigma = 0;
  for (unsigned seed = 0; seed < 100; ++seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> y(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) y[k] = std::exp(-t[k] / 1.8) + noise(rng);
    const FitResult fit = fit_exponential(t, y);
    CHECK(fit.converged);
    CHECK(std::abs(fit.value("tau") - 1.8) < 0.05);
    tau_hat.push_back(fit.value("tau"));
    if (std::abs(fit.value("tau") - 1.8) < 3.0 * fit.sigma("tau")) ++within_3sigma;
  }
  // The reported uncertainty is calibrated.
  CHECK(within_3sigma >= 95);
  double mean = 0.0;
  for (double v : tau_hat) mean += v / tau_hat.size();
  CHECK(std::abs(mean - 1.8) < 0.01);
}

TEST_CASE("exponential fit edge cases") {
  const auto t = linspace(0.0, 5.0, 30);
  const FitResult flat = fit_exponential(t, std::vector<double>(t.size(), 0.3));
  CHECK(flat.flagged("degenerate-amplitude"));
  CHECK_FALSE(flat.converged);
  CHECK(flat.value("offset") == doctest::Approx(0.3));

  std::vector<double> y(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) y[k] = 0.7 * std::exp(-t[k] / 0.9) + 0.1;
  const FitResult fit = fit_exponential(t, y);
  CHECK(fit.value("amplitude") == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(fit.value("tau") == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(fit.value("offset") == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(fit.iterations <= 200);

  CHECK_THROWS_AS(fit_exponential({0.0, 1.0}, {1.0, 0.5}), Error);
  CHECK_THROWS_AS(fit_exponential(t, std::vector<double>(3, 0.0)), Error);
  y[3] = std::nan("");
  CHECK_THROWS_AS(fit_exponential(t, y), Error);
}

TEST_CASE("damped sinusoid and spectral seeding") {
  const auto t = linspace(0.0, 4.0, 201);
  std::mt19937 rng(7);
  std::normal_distribution<double> noise(0.0, 0.005);
  std::vector<double> y(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    y[k] = 0.5 - 0.5 * std::exp(-t[k] / 3.0) * std::cos(2 * M_PI * 1.7 * t[k] + 0.3) + noise(rng);
  }
  const auto peaks = dominant_frequencies(t, y, 1);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].frequency == doctest::Approx(1.7).epsilon(0.03));

  const FitResult fit = fit_damped_sinusoid(t, y);
  CHECK(fit.converged);
  CHECK(fit.value("freq") == doctest::Approx(1.7).epsilon(1e-3));
  CHECK(fit.value("tau") == doctest::Approx(3.0).epsilon(0.05));
  CHECK(fit.value("amplitude") == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(std::remainder(fit.value("phase") - (0.3 + M_PI), 2 * M_PI)) < 0.02);
  CHECK(fit.sigma("freq") < 1e-3);

  CHECK_THROWS_AS(dominant_frequencies({0.0, 0.1, 0.3, 0.4}, {1, 2, 3, 4}, 1), Error);
}

TEST_CASE("multi-frequency fit separates beating components") {
  const auto t = linspace(0.0, 8.0, 400);
  std::vector<double> y(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    y[k] = 0.5 + std::exp(-t[k] / 5.0) *
                     (0.3 * std::cos(2 * M_PI * 1.0 * t[k]) + 0.15 * std::cos(2 * M_PI * 2.6 * t[k] + 1.0));
  }
  const FitResult fit = fit_multi_frequency(t, y, 2);
  CHECK(fit.converged);
  std::vector<double> f{fit.value("freq_0"), fit.value("freq_1")};
  std::sort(f.begin(), f.end());
  CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(f[1] == doctest::Approx(2.6).epsilon(1e-5));
  CHECK(fit.value("tau") == doctest::Approx(5.0).epsilon(1e-4));
  CHECK_THROWS_AS(fit_multi_frequency(t, y, 5), Error);
}

TEST_CASE("avoided crossing from synthetic two-line spectra") {
  const double j = 3.35;
  auto make = [&](double coupling, double background) {
    const auto x = linspace(-1.0, 1.0, 41);
    const auto f = linspace(5700.0, 5740.0, 161);
    SweepResult s(Axis{"dv", "mV", x}, Axis{"freq", "MHz", f}, {"p"});
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w1 = 5720.0 + 20.0 * x[i];
      const double w2 = 5720.0;
      const double mid = 0.5 * (w1 + w2);
      const double half = std::sqrt(0.25 * (w1 - w2) * (w1 - w2) + coupling * coupling);
      for (std::size_t k = 0; k < f.size(); ++k) {
        auto line = [&](double f0) { return 1.0 / (1.0 + std::pow(2.0 * (f[k] - f0) / 0.6, 2)); };
        s.field("p")[s.index(i, k)] = background + 0.4 * line(mid - half) + 0.3 * line(mid + half);
      }
    }
    return s;
  };
  const AvoidedCrossing ac = extract_avoided_crossing(make(j, 0.0), "p");
  CHECK_FALSE(ac.flagged);
  CHECK(ac.gap_mhz == doctest::Approx(2 * j).epsilon(1e-3));
  CHECK(ac.half_gap_mhz == doctest::Approx(j).epsilon(1e-3));
  CHECK(std::abs(ac.location) < 1e-3);
  CHECK(ac.linewidth_mhz == doctest::Approx(0.6).epsilon(0.05));

  // A constant background does not move the result.
  const AvoidedCrossing shifted = extract_avoided_crossing(make(j, 0.2), "p");
  CHECK(shifted.gap_mhz == doctest::Approx(ac.gap_mhz).epsilon(1e-6));

  const AvoidedCrossing none = extract_avoided_crossing(make(0.0, 0.0), "p");
  CHECK(none.flagged);

  SweepResult bad = make(j, 0.0);
  bad.axis2.unit = "mV";
  CHECK_THROWS_AS(extract_avoided_crossing(bad, "p"), Error);
}

TEST_CASE("minimum branch separation of known branches") {
  const auto x = linspace(0.0, 2.0, 81);
  std::vector<double> lo(x.size()), hi(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = 50.0 * (x[k] - 0.81);
    lo[k] = 6000.0 - std::sqrt(d * d + 62.5 * 62.5);
    hi[k] = 6000.0 + std::sqrt(d * d + 62.5 * 62.5);
  }
  const AvoidedCrossing ac = min_branch_separation(x, lo, hi);
  CHECK(ac.half_gap_mhz == doctest::Approx(62.5).epsilon(1e-6));
  CHECK(ac.location == doctest::Approx(0.81).epsilon(1e-6));
}

TEST_CASE("dressed spectrum labels and ZZ") {
  SystemSpec spec = two_qubit_spec(3);
  const DressedSpectrum ds = dressed_spectrum(spec);
  CHECK(ds.energy({0, 0, 0}) < ds.energy({0, 1, 0}));
  // The exchange splitting of the single-excitation qubit manifold.
  const double split = ds.transition({0, 1, 0}, {0, 0, 1});
  CHECK(split > 14.3);
  CHECK(ds.qubit_character({0, 0, 1}, 1) > 0.9);
  CHECK(ds.qubit_character({0, 0, 1}, 0) > 0.01);

  // Two-level qubits with flip-flop exchange and no resonator coupling: no ZZ.
  spec.qubits[0].g = Frequency::mhz(0.0);
  CHECK(std::abs(zz_shift_mhz(spec)) < 1e-6);
  CHECK_THROWS_AS(zz_shift_mhz(spec, 0, 0), Error);
}
