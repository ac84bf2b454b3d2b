#include <cmath>
#include <random>

#include <doctest.h>

#include "neoqed/operator.hpp"

using namespace neoqed;

namespace {

Matrix random_hermitian(std::mt19937& rng, Eigen::Index n) {
  std::normal_distribution<double> gauss;
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) m(j, k) = Complex(gauss(rng), gauss(rng));
  return 0.5 * (m + m.adjoint());
}

}  // namespace

TEST_CASE("annihilation operator ladder entries") {
  const Operator a2 = annihilation(2);
  CHECK(a2(0, 1) == Complex(1.0));
  CHECK(a2(0, 0) == Complex(0.0));
  CHECK(a2(1, 0) == Complex(0.0));
  CHECK(a2(1, 1) == Complex(0.0));

  const Operator a3 = annihilation(3);
  CHECK(a3(1, 2).real() == doctest::Approx(std::sqrt(2.0)));

  const Operator a4 = annihilation(4);
  const Operator n = a4.adjoint() * a4;
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(n(k, k).real() == doctest::Approx(static_cast<double>(k)));
  }
  CHECK((n.matrix() - Matrix(n.matrix().diagonal().asDiagonal())).norm() == 0.0);

  CHECK_THROWS_AS(annihilation(1), Error);
  try {
    annihilation(0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidDimension);
  }
}

TEST_CASE("pauli sign convention: excited state at +1/2 omega") {
  const Operator z = pauli(PauliKind::Z);
  CHECK(z(0, 0) == Complex(-1.0));
  CHECK(z(1, 1) == Complex(1.0));
  const Operator proj = pauli(PauliKind::Plus) * pauli(PauliKind::Minus);
  CHECK(proj(0, 0) == Complex(0.0));
  CHECK(proj(1, 1) == Complex(1.0));
  const Operator sp = pauli(PauliKind::Plus);
  CHECK((sp * sp).max_abs() == 0.0);
  // sigma+ |0> = |1>
  CHECK(sp(1, 0) == Complex(1.0));
}

TEST_CASE("embed places the factor in fixed tensor order") {
  const HilbertSpace space({3, 2, 2});
  const Operator z = pauli(PauliKind::Z);
  const Operator e = embed(z, 1, space);
  REQUIRE(e.dim() == 12);
  // I3 (x) Z (x) I2 by explicit index arithmetic
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t c = 0; c < 12; ++c) {
      const auto dr = space.digits_of(r);
      const auto dc = space.digits_of(c);
      const Complex expected =
          (dr[0] == dc[0] && dr[2] == dc[2]) ? z(dr[1], dc[1]) : Complex(0.0);
      CHECK(e(r, c) == expected);
    }
  }

  const HilbertSpace s32({3, 2});
  const Operator a = annihilation(3);
  const Operator num = a.adjoint() * a;
  CHECK(embed(num, 0, s32).trace().real() == doctest::Approx(num.trace().real() * 2.0));

  const Operator z1 = embed(z, 1, space);
  const Operator z2 = embed(z, 2, space);
  CHECK(commutator(z1, z2).max_abs() == 0.0);

  CHECK_THROWS_AS(embed(z, 3, space), Error);
  CHECK_THROWS_AS(embed(a, 1, space), Error);
}

TEST_CASE("embed preserves Hermiticity and spectral norm; partial trace round-trips") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const HilbertSpace space({4, 2, 2});
    const std::size_t slot = static_cast<std::size_t>(trial % 3);
    const auto d = static_cast<Eigen::Index>(space.factor(slot));
    const Operator x(HilbertSpace({space.factor(slot)}), random_hermitian(rng, d));
    const Operator big = embed(x, slot, space);
    CHECK(big.is_hermitian());
    const auto ev_small = eigenvalues_hermitian(x);
    const auto ev_big = eigenvalues_hermitian(big);
    const double norm_small = std::max(std::abs(ev_small.front()), std::abs(ev_small.back()));
    const double norm_big = std::max(std::abs(ev_big.front()), std::abs(ev_big.back()));
    CHECK(norm_big == doctest::Approx(norm_small).epsilon(1e-12));
    const double other = static_cast<double>(space.total_dim()) / static_cast<double>(d);
    const Operator back = partial_trace(big, slot);
    CHECK((back.matrix() / other - x.matrix()).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("eigenvalues_hermitian basic cases") {
  const HilbertSpace s3({3});
  Matrix d = Matrix::Zero(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  const auto ev = eigenvalues_hermitian(Operator(s3, d));
  CHECK(ev[0] == doctest::Approx(1.0));
  CHECK(ev[1] == doctest::Approx(2.0));
  CHECK(ev[2] == doctest::Approx(3.0));

  const Operator sx = pauli(PauliKind::Plus) + pauli(PauliKind::Minus);
  const auto evx = eigenvalues_hermitian(sx);
  CHECK(evx[0] == doctest::Approx(-1.0));
  CHECK(evx[1] == doctest::Approx(1.0));

  // Two degenerate qubits with exchange J: the one-excitation block is
  // [[0, J], [J, 0]] with eigenvalues -J, +J, so the split is 2J.
  const double j = 0.37;
  const HilbertSpace two({2, 2});
  const Operator sp1 = embed(pauli(PauliKind::Plus), 0, two);
  const Operator sm1 = embed(pauli(PauliKind::Minus), 0, two);
  const Operator sp2 = embed(pauli(PauliKind::Plus), 1, two);
  const Operator sm2 = embed(pauli(PauliKind::Minus), 1, two);
  const Operator h = j * (sp1 * sm2 + sm1 * sp2);
  const auto evj = eigenvalues_hermitian(h);
  // spectrum {-J, 0, 0, +J}
  CHECK(evj[3] - evj[0] == doctest::Approx(2.0 * j).epsilon(1e-14));

  Matrix nh = Matrix::Zero(2, 2);
  nh(0, 1) = 1.0;
  CHECK_THROWS_AS(eigenvalues_hermitian(Operator(HilbertSpace({2}), nh)), Error);
}

TEST_CASE("eigenvalues agree with characteristic-polynomial roots for 2x2 and 3x3") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    // 2x2: lambda = (a+d)/2 +- sqrt(((a-d)/2)^2 + |b|^2)
    const Matrix m2 = random_hermitian(rng, 2);
    const double a = m2(0, 0).real(), dd = m2(1, 1).real();
    const double disc = std::sqrt(0.25 * (a - dd) * (a - dd) + std::norm(m2(0, 1)));
    const auto ev2 = eigenvalues_hermitian(Operator(HilbertSpace({2}), m2));
    CHECK(std::abs(ev2[0] - (0.5 * (a + dd) - disc)) < 1e-10);
    CHECK(std::abs(ev2[1] - (0.5 * (a + dd) + disc)) < 1e-10);

    // 3x3: trigonometric solution of the depressed cubic
    const Matrix m3 = random_hermitian(rng, 3);
    const double p1 = std::norm(m3(0, 1)) + std::norm(m3(0, 2)) + std::norm(m3(1, 2));
    const double q = m3.trace().real() / 3.0;
    const double p2 = std::pow(m3(0, 0).real() - q, 2) + std::pow(m3(1, 1).real() - q, 2) +
                      std::pow(m3(2, 2).real() - q, 2) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Matrix b = (m3 - q * Matrix::Identity(3, 3)) / p;
    const double r = std::clamp(0.5 * b.determinant().real(), -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double l1 = q + 2.0 * p * std::cos(phi);
    const double l3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    const double l2 = 3.0 * q - l1 - l3;
    const auto ev3 = eigenvalues_hermitian(Operator(HilbertSpace({3}), m3));
    CHECK(std::abs(ev3[0] - l3) < 1e-10);
    CHECK(std::abs(ev3[1] - l2) < 1e-10);
    CHECK(std::abs(ev3[2] - l1) < 1e-10);
  }
}

TEST_CASE("expectation values") {
  const HilbertSpace q({2});
  const std::size_t excited[] = {1};
  const DensityMatrix rho1 = DensityMatrix::basis_state(q, excited);
  const Operator pe = pauli(PauliKind::Plus) * pauli(PauliKind::Minus);
  CHECK(expectation(rho1, pe).real() == doctest::Approx(1.0));

  const HilbertSpace s({3, 2});
  const DensityMatrix mixed = DensityMatrix::maximally_mixed(s);
  const Operator z = embed(pauli(PauliKind::Z), 1, s);
  CHECK(std::abs(expectation(mixed, z)) < 1e-15);

  // Coherent state |alpha|^2 = 20 truncated at 60 levels. Oracle: Poisson
  // mean over n < 60 renormalized, 19.99999999998 (evaluated with mpmath).
  const std::size_t cutoff = 60;
  const double mean = 20.0;
  Eigen::VectorXcd psi(cutoff);
  for (std::size_t n = 0; n < cutoff; ++n) {
    const double nn = static_cast<double>(n);
    psi(static_cast<Eigen::Index>(n)) =
        std::exp(0.5 * (nn * std::log(mean) - mean - std::lgamma(nn + 1.0)));
  }
  psi.normalize();
  const DensityMatrix coherent(HilbertSpace({cutoff}), psi * psi.adjoint());
  const Operator a = annihilation(cutoff);
  const Complex nbar = expectation(coherent, a.adjoint() * a);
  CHECK(std::abs(nbar.real() - 19.99999999998) < 1e-3);
  CHECK(std::abs(nbar.imag()) < 1e-10);

  CHECK_THROWS_AS(expectation(coherent, pe), Error);
}

TEST_CASE("density matrix validation") {
  const HilbertSpace q({2});
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 0.5;
  CHECK_THROWS_AS(DensityMatrix(q, m), Error);
  m(1, 1) = 0.5;
  m(0, 1) = Complex(0.0, 0.1);
  CHECK_THROWS_AS(DensityMatrix(q, m), Error);
  m(1, 0) = Complex(0.0, -0.1);
  const DensityMatrix ok(q, m);
  CHECK(ok.purity() == doctest::Approx(0.5 + 2 * 0.01));
  CHECK(ok.min_eigenvalue() == doctest::Approx(0.4));
}

TEST_CASE("Hilbert space invariants") {
  CHECK_THROWS_AS(HilbertSpace({1, 2}), Error);
  CHECK_THROWS_AS(HilbertSpace(std::vector<std::size_t>{}), Error);
  const HilbertSpace s = HilbertSpace::cavity_qubits(5, 3);
  CHECK(s.total_dim() == 40);
  for (std::size_t k = 0; k < s.total_dim(); ++k) {
    CHECK(s.index_of(s.digits_of(k)) == k);
  }
}
