#include "neoqed/operator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace neoqed {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::NotHermitian: return "not-hermitian";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::Integration: return "integration";
    case ErrorKind::Fit: return "fit";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace {

constexpr double kDensityTraceTol = 1e-8;
constexpr double kDensityHermTol = 1e-10;
constexpr double kEigenHermTol = 1e-10;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_same_space(const HilbertSpace& a, const HilbertSpace& b, const char* what) {
  if (!(a == b)) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": operand spaces differ");
  }
}

double hermiticity_defect_of(const Matrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace

HilbertSpace::HilbertSpace(std::vector<std::size_t> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) {
    throw Error(ErrorKind::InvalidDimension, "Hilbert space needs at least one factor");
  }
  for (std::size_t f : factors_) {
    if (f < 2) {
      throw Error(ErrorKind::InvalidDimension,
                  "every factor dimension must be >= 2, got " + std::to_string(f));
    }
  }
  total_dim_ = std::accumulate(factors_.begin(), factors_.end(), std::size_t{1},
                               std::multiplies<>());
}

HilbertSpace HilbertSpace::cavity_qubits(std::size_t cutoff, std::size_t num_qubits) {
  std::vector<std::size_t> f{cutoff};
  f.insert(f.end(), num_qubits, 2);
  return HilbertSpace(std::move(f));
}

std::size_t HilbertSpace::factor(std::size_t slot) const {
  if (slot >= factors_.size()) {
    throw Error(ErrorKind::InvalidDimension,
                "subsystem slot " + std::to_string(slot) + " out of range");
  }
  return factors_[slot];
}

std::size_t HilbertSpace::index_of(std::span<const std::size_t> digits) const {
  if (digits.size() != factors_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "digit count does not match factor count");
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (digits[k] >= factors_[k]) {
      throw Error(ErrorKind::InvalidDimension, "occupation exceeds factor dimension");
    }
    index = index * factors_[k] + digits[k];
  }
  return index;
}

std::vector<std::size_t> HilbertSpace::digits_of(std::size_t index) const {
  std::vector<std::size_t> digits(factors_.size());
  for (std::size_t k = factors_.size(); k-- > 0;) {
    digits[k] = index % factors_[k];
    index /= factors_[k];
  }
  return digits;
}

Operator::Operator(HilbertSpace space, Matrix elements)
    : space_(std::move(space)), elements_(std::move(elements)) {
  const auto n = idx(space_.total_dim());
  if (elements_.rows() != n || elements_.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "operator matrix is " + std::to_string(elements_.rows()) + "x" +
                    std::to_string(elements_.cols()) + ", space dimension is " +
                    std::to_string(n));
  }
}

Operator Operator::zero(const HilbertSpace& space) {
  const auto n = idx(space.total_dim());
  return Operator(space, Matrix::Zero(n, n));
}

Operator Operator::identity(const HilbertSpace& space) {
  const auto n = idx(space.total_dim());
  return Operator(space, Matrix::Identity(n, n));
}

Operator Operator::adjoint() const { return Operator(space_, elements_.adjoint()); }

double Operator::max_abs() const {
  return elements_.size() == 0 ? 0.0 : elements_.cwiseAbs().maxCoeff();
}

double Operator::hermiticity_defect() const { return hermiticity_defect_of(elements_); }

bool Operator::is_hermitian(double rel_tol) const {
  const double scale = std::max(max_abs(), 1e-300);
  return hermiticity_defect() <= rel_tol * scale;
}

Operator& Operator::operator+=(const Operator& rhs) {
  require_same_space(space_, rhs.space_, "operator +");
  elements_ += rhs.elements_;
  return *this;
}

Operator& Operator::operator-=(const Operator& rhs) {
  require_same_space(space_, rhs.space_, "operator -");
  elements_ -= rhs.elements_;
  return *this;
}

Operator& Operator::operator*=(Complex scale) {
  elements_ *= scale;
  return *this;
}

Operator operator*(const Operator& lhs, const Operator& rhs) {
  require_same_space(lhs.space_, rhs.space_, "operator *");
  return Operator(lhs.space_, lhs.elements_ * rhs.elements_);
}

DensityMatrix::DensityMatrix(HilbertSpace space, Matrix elements)
    : space_(std::move(space)), elements_(std::move(elements)) {
  const auto n = idx(space_.total_dim());
  if (elements_.rows() != n || elements_.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "density matrix does not match space dimension");
  }
  const double defect = hermiticity_defect_of(elements_);
  if (defect > kDensityHermTol) {
    throw Error(ErrorKind::NotHermitian,
                "density matrix not Hermitian (defect " + std::to_string(defect) + ")");
  }
  const double drift = std::abs(elements_.trace() - Complex(1.0));
  if (drift > kDensityTraceTol) {
    throw Error(ErrorKind::InvalidSpec,
                "density matrix trace differs from 1 by " + std::to_string(drift));
  }
}

DensityMatrix DensityMatrix::basis_state(const HilbertSpace& space,
                                         std::span<const std::size_t> digits) {
  const auto n = idx(space.total_dim());
  Matrix m = Matrix::Zero(n, n);
  const auto k = idx(space.index_of(digits));
  m(k, k) = 1.0;
  return DensityMatrix(space, std::move(m));
}

DensityMatrix DensityMatrix::maximally_mixed(const HilbertSpace& space) {
  const auto n = idx(space.total_dim());
  return DensityMatrix(space, Matrix::Identity(n, n) / static_cast<double>(n));
}

double DensityMatrix::purity() const {
  // tr(rho^2) = sum |rho_jk|^2 for Hermitian rho
  return elements_.squaredNorm();
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(elements_, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

Operator annihilation(std::size_t cutoff) {
  if (cutoff < 2) {
    throw Error(ErrorKind::InvalidDimension,
                "Fock cutoff must be >= 2, got " + std::to_string(cutoff));
  }
  HilbertSpace space({cutoff});
  Matrix m = Matrix::Zero(idx(cutoff), idx(cutoff));
  for (std::size_t n = 0; n + 1 < cutoff; ++n) {
    m(idx(n), idx(n + 1)) = std::sqrt(static_cast<double>(n + 1));
  }
  return Operator(std::move(space), std::move(m));
}

Operator pauli(PauliKind kind) {
  HilbertSpace space({2});
  Matrix m = Matrix::Zero(2, 2);
  switch (kind) {
    case PauliKind::Z:
      m(0, 0) = -1.0;
      m(1, 1) = 1.0;
      break;
    case PauliKind::Plus:
      m(1, 0) = 1.0;
      break;
    case PauliKind::Minus:
      m(0, 1) = 1.0;
      break;
  }
  return Operator(std::move(space), std::move(m));
}

Operator embed(const Operator& op, std::size_t slot, const HilbertSpace& space) {
  const std::size_t d = space.factor(slot);
  if (op.dim() != d) {
    throw Error(ErrorKind::DimensionMismatch,
                "operator dimension " + std::to_string(op.dim()) + " does not match factor " +
                    std::to_string(slot) + " of dimension " + std::to_string(d));
  }
  std::size_t left = 1;
  for (std::size_t k = 0; k < slot; ++k) left *= space.factors()[k];
  const std::size_t right = space.total_dim() / (left * d);
  Matrix m = Eigen::kroneckerProduct(
      Matrix::Identity(idx(left), idx(left)),
      Eigen::kroneckerProduct(op.matrix(), Matrix::Identity(idx(right), idx(right))).eval());
  return Operator(space, std::move(m));
}

Operator partial_trace(const Operator& op, std::size_t slot) {
  const HilbertSpace& space = op.space();
  const std::size_t d = space.factor(slot);
  std::size_t left = 1;
  for (std::size_t k = 0; k < slot; ++k) left *= space.factors()[k];
  const std::size_t right = space.total_dim() / (left * d);
  Matrix reduced = Matrix::Zero(idx(d), idx(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      Complex acc = 0.0;
      for (std::size_t l = 0; l < left; ++l) {
        for (std::size_t r = 0; r < right; ++r) {
          acc += op((l * d + i) * right + r, (l * d + j) * right + r);
        }
      }
      reduced(idx(i), idx(j)) = acc;
    }
  }
  return Operator(HilbertSpace({d}), std::move(reduced));
}

Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

EigenSystem eigensystem_hermitian(const Operator& op) {
  const double scale = std::max(op.max_abs(), 1e-300);
  const double defect = op.hermiticity_defect();
  if (defect > kEigenHermTol * scale) {
    throw Error(ErrorKind::NotHermitian,
                "eigenvalues_hermitian: relative Hermiticity defect " +
                    std::to_string(defect / scale));
  }
  // Solve on the exactly Hermitian part so rounding noise cannot leak in.
  const Matrix sym = 0.5 * (op.matrix() + op.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NotHermitian, "eigen-decomposition did not converge");
  }
  EigenSystem out;
  out.values.assign(solver.eigenvalues().data(),
                    solver.eigenvalues().data() + solver.eigenvalues().size());
  out.vectors = solver.eigenvectors();
  return out;
}

std::vector<double> eigenvalues_hermitian(const Operator& op) {
  const double scale = std::max(op.max_abs(), 1e-300);
  if (op.hermiticity_defect() > kEigenHermTol * scale) {
    throw Error(ErrorKind::NotHermitian, "eigenvalues_hermitian: operator is not Hermitian");
  }
  const Matrix sym = 0.5 * (op.matrix() + op.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  std::vector<double> values(solver.eigenvalues().data(),
                             solver.eigenvalues().data() + solver.eigenvalues().size());
  return values;
}

Complex expectation(const DensityMatrix& rho, const Operator& op) {
  require_same_space(rho.space(), op.space(), "expectation");
  // tr(rho op) = sum_jk rho_jk op_kj
  return rho.matrix().cwiseProduct(op.matrix().transpose()).sum();
}

}  // namespace neoqed
