#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "neoqed/error.hpp"

namespace neoqed {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

/// Tensor-product space. Factor order is fixed: resonator Fock space first,
/// then one two-level factor per qubit in index order.
class HilbertSpace {
 public:
  HilbertSpace() = default;
  explicit HilbertSpace(std::vector<std::size_t> factors);

  /// Resonator with `cutoff` Fock states plus `num_qubits` two-level factors.
  static HilbertSpace cavity_qubits(std::size_t cutoff, std::size_t num_qubits);

  const std::vector<std::size_t>& factors() const noexcept { return factors_; }
  std::size_t factor(std::size_t slot) const;
  std::size_t num_factors() const noexcept { return factors_.size(); }
  std::size_t total_dim() const noexcept { return total_dim_; }

  /// Product-basis index of the given per-factor occupation digits.
  std::size_t index_of(std::span<const std::size_t> digits) const;
  /// Inverse of index_of.
  std::vector<std::size_t> digits_of(std::size_t index) const;

  friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;

 private:
  std::vector<std::size_t> factors_;
  std::size_t total_dim_ = 0;
};

/// Dense square operator tied to a HilbertSpace.
class Operator {
 public:
  Operator() = default;
  Operator(HilbertSpace space, Matrix elements);

  static Operator zero(const HilbertSpace& space);
  static Operator identity(const HilbertSpace& space);

  const HilbertSpace& space() const noexcept { return space_; }
  const Matrix& matrix() const noexcept { return elements_; }
  std::size_t dim() const noexcept { return space_.total_dim(); }
  Complex operator()(std::size_t row, std::size_t col) const {
    return elements_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }

  Operator adjoint() const;
  Complex trace() const { return elements_.trace(); }
  double max_abs() const;
  /// max_{jk} |H_jk - conj(H_kj)|
  double hermiticity_defect() const;
  bool is_hermitian(double rel_tol = 1e-12) const;

  Operator& operator+=(const Operator& rhs);
  Operator& operator-=(const Operator& rhs);
  Operator& operator*=(Complex scale);

  friend Operator operator+(Operator lhs, const Operator& rhs) { return lhs += rhs; }
  friend Operator operator-(Operator lhs, const Operator& rhs) { return lhs -= rhs; }
  friend Operator operator*(Operator lhs, Complex scale) { return lhs *= scale; }
  friend Operator operator*(Complex scale, Operator rhs) { return rhs *= scale; }
  friend Operator operator*(double scale, Operator rhs) { return rhs *= Complex(scale); }
  friend Operator operator*(const Operator& lhs, const Operator& rhs);

 private:
  HilbertSpace space_;
  Matrix elements_;
};

/// Density matrix; construction validates Hermiticity and unit trace.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(HilbertSpace space, Matrix elements);

  /// |digits><digits| in the product basis.
  static DensityMatrix basis_state(const HilbertSpace& space,
                                   std::span<const std::size_t> digits);
  static DensityMatrix maximally_mixed(const HilbertSpace& space);

  const HilbertSpace& space() const noexcept { return space_; }
  const Matrix& matrix() const noexcept { return elements_; }
  std::size_t dim() const noexcept { return space_.total_dim(); }

  double purity() const;
  double min_eigenvalue() const;

 private:
  HilbertSpace space_;
  Matrix elements_;
};

enum class PauliKind { Z, Plus, Minus };

/// Truncated bosonic lowering operator: a(n, n+1) = sqrt(n+1).
Operator annihilation(std::size_t cutoff);
/// Basis |0>=ground, |1>=excited; Z = diag(-1, +1), Plus|0> = |1>.
Operator pauli(PauliKind kind);

/// I ⊗ ... ⊗ op ⊗ ... ⊗ I with op in factor `slot`.
Operator embed(const Operator& op, std::size_t slot, const HilbertSpace& space);
/// Reduced operator on factor `slot` (trace over every other factor).
Operator partial_trace(const Operator& op, std::size_t slot);

Operator commutator(const Operator& a, const Operator& b);

struct EigenSystem {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k belongs to values[k]
};

/// Ascending real spectrum; rejects inputs that are not Hermitian within
/// 1e-10 relative to max|H|.
std::vector<double> eigenvalues_hermitian(const Operator& op);
EigenSystem eigensystem_hermitian(const Operator& op);

/// tr(rho * op).
Complex expectation(const DensityMatrix& rho, const Operator& op);

}  // namespace neoqed
