#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "orbit/errors.hpp"

namespace orbit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class GeneratorBasis;
using BasisPtr = std::shared_ptr<const GeneratorBasis>;

namespace detail {

// Affine elements carry an exact (0, ..., 0, 1) bottom row; algebra elements
// an exact all-zero one.  Products and affine inverses preserve both, so
// pinning is only needed where roundoff can creep in (user input, iterative
// square roots).
inline void pin_group_row(Matrix& m) {
  const Eigen::Index n = m.rows();
  m.row(n - 1).setZero();
  m(n - 1, n - 1) = 1.0;
}

inline Matrix affine_inverse(const Matrix& m) {
  const Eigen::Index d = m.rows() - 1;
  Matrix out = Matrix::Zero(d + 1, d + 1);
  const Matrix linv = m.topLeftCorner(d, d).inverse();
  out.topLeftCorner(d, d) = linv;
  out.topRightCorner(d, 1) = -linv * m.topRightCorner(d, 1);
  out(d, d) = 1.0;
  return out;
}

}  // namespace detail

// A finite-dimensional matrix Lie algebra in homogeneous affine form:
// (d+1)x(d+1) generators with zero bottom row.  Construction computes the
// structure constants and refuses bases whose commutators leave the span.
class GeneratorBasis : public std::enable_shared_from_this<GeneratorBasis> {
 public:
  static BasisPtr make(std::string name, int ambient_dim,
                       std::vector<Matrix> generators,
                       std::vector<std::string> labels) {
    return BasisPtr(new GeneratorBasis(std::move(name), ambient_dim,
                                       std::move(generators),
                                       std::move(labels)));
  }

  const std::string& name() const { return name_; }
  int ambient_dim() const { return d_; }
  int matrix_size() const { return d_ + 1; }
  int dim() const { return static_cast<int>(gens_.size()); }

  const Matrix& generator(int a) const {
    if (a < 0 || a >= dim()) throw IndexError("generator index out of range");
    return gens_[a];
  }
  const std::string& label(int a) const {
    if (a < 0 || a >= dim()) throw IndexError("generator index out of range");
    return labels_[a];
  }

  // c^c_{ab} with [T_a, T_b] = sum_c c^c_{ab} T_c.
  double structure_constant(int a, int b, int c) const {
    const int r = dim();
    if (a < 0 || b < 0 || c < 0 || a >= r || b >= r || c >= r)
      throw IndexError("structure constant index out of range");
    return c_[(static_cast<std::size_t>(a) * r + b) * r + c];
  }

  Vector commutator_coords(int a, int b) const {
    const int r = dim();
    Vector out(r);
    for (int c = 0; c < r; ++c) out[c] = structure_constant(a, b, c);
    return out;
  }

  // sum_a v_a T_a.
  Matrix assemble(const Vector& v) const {
    if (v.size() != dim()) throw DimError("coefficient count != basis dim");
    Matrix m = Matrix::Zero(d_ + 1, d_ + 1);
    for (int a = 0; a < dim(); ++a) m += v[a] * gens_[a];
    return m;
  }

  // Least-squares coordinates of m in the generator span plus the residual
  // norm of the reconstruction.
  std::pair<Vector, double> project(const Matrix& m) const {
    if (m.rows() != d_ + 1 || m.cols() != d_ + 1)
      throw DimError("matrix size does not match basis ambient dim");
    Vector flat(span_.rows());
    for (Eigen::Index j = 0, k = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) flat[k++] = m(i, j);
    Vector coords = qr_.solve(flat);
    const double residual = (span_ * coords - flat).norm();
    return {coords, residual};
  }

  double closure_defect() const { return closure_defect_; }

 private:
  GeneratorBasis(std::string name, int ambient_dim,
                 std::vector<Matrix> generators,
                 std::vector<std::string> labels)
      : name_(std::move(name)),
        d_(ambient_dim),
        gens_(std::move(generators)),
        labels_(std::move(labels)) {
    if (d_ < 1) throw DimError("ambient dim must be >= 1");
    if (gens_.empty()) throw DimError("basis needs at least one generator");
    if (labels_.size() != gens_.size())
      throw DimError("one label per generator required");
    const int n = d_ + 1;
    for (auto& g : gens_) {
      if (g.rows() != n || g.cols() != n)
        throw DimError("generator size does not match ambient dim");
      if (!g.allFinite()) throw InvalidAlgebraVector("non-finite generator");
      if (g.row(n - 1).cwiseAbs().maxCoeff() > 1e-12)
        throw DomainError("generator bottom row must vanish");
      g.row(n - 1).setZero();
    }

    const int r = dim();
    span_.resize(static_cast<Eigen::Index>(n) * n, r);
    for (int a = 0; a < r; ++a)
      for (Eigen::Index j = 0, k = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) span_(k++, a) = gens_[a](i, j);
    qr_.compute(span_);
    if (qr_.rank() < r)
      throw ConfigError("generators are linearly dependent");

    // Structure constants via projection of each commutator onto the span.
    c_.assign(static_cast<std::size_t>(r) * r * r, 0.0);
    closure_defect_ = 0.0;
    for (int a = 0; a < r; ++a) {
      for (int b = 0; b < r; ++b) {
        const Matrix comm = gens_[a] * gens_[b] - gens_[b] * gens_[a];
        auto [coords, res] = project(comm);
        closure_defect_ = std::max(closure_defect_, res);
        if (res > 1e-10)
          throw NotAdClosed("basis '" + name_ + "' is not closed: [" +
                            labels_[a] + ", " + labels_[b] +
                            "] leaves the generator span");
        for (int c = 0; c < r; ++c)
          c_[(static_cast<std::size_t>(a) * r + b) * r + c] = coords[c];
      }
    }
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b)
        for (int c = 0; c < r; ++c)
          if (std::abs(structure_constant(a, b, c) +
                       structure_constant(b, a, c)) > 1e-12)
            throw NotAdClosed("structure constants are not antisymmetric");
  }

  std::string name_;
  int d_;
  std::vector<Matrix> gens_;
  std::vector<std::string> labels_;
  Matrix span_;  // (d+1)^2 x r, column a = vec(T_a)
  Eigen::ColPivHouseholderQR<Matrix> qr_;
  std::vector<double> c_;
  double closure_defect_ = 0.0;
};

inline void require_same_basis(const BasisPtr& a, const BasisPtr& b,
                               const char* where) {
  if (a.get() != b.get())
    throw BasisMismatch(std::string(where) + ": operands use different bases");
}

// Coordinates in a fixed generator basis.
struct AlgebraVector {
  AlgebraVector(BasisPtr basis_in, Vector coeffs_in)
      : basis(std::move(basis_in)), coeffs(std::move(coeffs_in)) {
    if (!basis) throw BasisMismatch("AlgebraVector: null basis");
    if (coeffs.size() != basis->dim())
      throw DimError("coefficient count != basis dim");
    if (!coeffs.allFinite())
      throw InvalidAlgebraVector("non-finite algebra coefficients");
  }

  Matrix matrix() const { return basis->assemble(coeffs); }

  BasisPtr basis;
  Vector coeffs;
};

inline AlgebraVector algebra(const BasisPtr& basis,
                             std::initializer_list<double> v) {
  Vector c(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) c[i++] = x;
  return AlgebraVector(basis, c);
}

// Invertible affine transform tied to a basis.
class GroupElement {
 public:
  GroupElement(BasisPtr basis_in, Matrix m) : basis_(std::move(basis_in)) {
    if (!basis_) throw BasisMismatch("GroupElement: null basis");
    const int n = basis_->matrix_size();
    if (m.rows() != n || m.cols() != n)
      throw DimError("matrix size does not match basis ambient dim");
    if (!m.allFinite()) throw DomainError("non-finite group element");
    Matrix row_err = m.row(n - 1);
    row_err(0, n - 1) -= 1.0;
    if (row_err.cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("bottom row must be (0, ..., 0, 1)");
    detail::pin_group_row(m);
    mat_ = std::move(m);
    const Matrix check = detail::affine_inverse(mat_) * mat_;
    if (!check.allFinite() ||
        (check - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
      throw DomainError("group element is numerically singular");
  }

  static GroupElement identity(const BasisPtr& basis) {
    return GroupElement(basis,
                        Matrix::Identity(basis->matrix_size(),
                                         basis->matrix_size()));
  }

  const Matrix& matrix() const { return mat_; }
  const BasisPtr& basis() const { return basis_; }

  Matrix linear() const {
    const int d = basis_->ambient_dim();
    return mat_.topLeftCorner(d, d);
  }
  Vector translation() const {
    const int d = basis_->ambient_dim();
    return mat_.topRightCorner(d, 1);
  }

 private:
  BasisPtr basis_;
  Matrix mat_;
};

inline GroupElement compose(const GroupElement& a, const GroupElement& b) {
  require_same_basis(a.basis(), b.basis(), "compose");
  return GroupElement(a.basis(), a.matrix() * b.matrix());
}

inline GroupElement inverse(const GroupElement& g) {
  return GroupElement(g.basis(), detail::affine_inverse(g.matrix()));
}

// Scaling-and-squaring with a fixed-order Taylor kernel.  exp(0) is the
// identity bit for bit.
inline GroupElement exp_map(const AlgebraVector& v) {
  const Matrix m = v.matrix();
  const Eigen::Index n = m.rows();
  int squarings = 0;
  for (double nrm = m.norm(); nrm > 0.5 && squarings < 60; nrm *= 0.5)
    ++squarings;
  const Matrix a = m * std::ldexp(1.0, -squarings);
  Matrix r = Matrix::Identity(n, n);
  for (int k = 16; k >= 1; --k)
    r = Matrix::Identity(n, n) + (a * r) / static_cast<double>(k);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return GroupElement(v.basis, std::move(r));
}

namespace detail {

// One Denman-Beavers square root; valid for spectra off the closed negative
// real axis, which log_map guards before calling.
inline Matrix affine_sqrt(const Matrix& m) {
  const Eigen::Index n = m.rows();
  Matrix y = m;
  Matrix z = Matrix::Identity(n, n);
  for (int it = 0; it < 40; ++it) {
    const Matrix yn = 0.5 * (y + z.inverse());
    const Matrix zn = 0.5 * (z + y.inverse());
    const double change = (yn - y).norm();
    y = yn;
    z = zn;
    if (change <= 1e-15 * std::max(1.0, y.norm())) break;
  }
  pin_group_row(y);
  return y;
}

}  // namespace detail

// Principal logarithm by inverse scaling and squaring: repeated square roots
// into a neighbourhood of the identity, then an alternating series.  The
// branch guard rejects spectra on the closed negative real axis, so planar
// rotation coordinates come back in (-pi, pi).
inline AlgebraVector log_map(const GroupElement& g) {
  const Matrix& m = g.matrix();
  const Eigen::Index n = m.rows();

  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()[i];
    if (lam.real() <= 0.0 && std::abs(lam.imag()) <= 1e-9 * std::abs(lam))
      throw LogBranchError(
          "log_map: eigenvalue on the negative real axis (cut locus)");
  }

  Matrix a = m;
  int halvings = 0;
  while ((a - Matrix::Identity(n, n)).norm() > 0.25) {
    if (++halvings > 50)
      throw LogBranchError("log_map: square-root reduction did not converge");
    a = detail::affine_sqrt(a);
  }

  const Matrix e = a - Matrix::Identity(n, n);
  Matrix x = Matrix::Zero(n, n);
  Matrix p = e;
  for (int k = 1; k <= 32; ++k) {
    x += ((k % 2 == 1) ? 1.0 : -1.0) / static_cast<double>(k) * p;
    p = p * e;
  }
  x *= std::ldexp(1.0, halvings);

  auto [coords, residual] = g.basis()->project(x);
  if (residual > 1e-8 * std::max(1.0, x.norm()))
    throw LogBranchError("log_map: logarithm leaves the generator span");
  return AlgebraVector(g.basis(), coords);
}

// Ad(g) as an r x r matrix: column a holds the span coordinates of
// g T_a g^{-1}.  A projection residual above tolerance means the span is not
// conjugation-stable, i.e. the basis is misconfigured.
inline Matrix adjoint(const GroupElement& g) {
  const auto& basis = *g.basis();
  const int r = basis.dim();
  const Matrix ginv = detail::affine_inverse(g.matrix());
  Matrix ad(r, r);
  for (int a = 0; a < r; ++a) {
    const Matrix conj = g.matrix() * basis.generator(a) * ginv;
    auto [coords, residual] = basis.project(conj);
    if (residual > 1e-8 * std::max(1.0, conj.norm()))
      throw NotAdClosed("adjoint: conjugated generator leaves the span");
    ad.col(a) = coords;
  }
  return ad;
}

// Coordinates of the matrix commutator [a, b], recovered in the span.
inline AlgebraVector bracket(const AlgebraVector& a, const AlgebraVector& b) {
  require_same_basis(a.basis, b.basis, "bracket");
  const Matrix ma = a.matrix();
  const Matrix mb = b.matrix();
  const Matrix comm = ma * mb - mb * ma;
  auto [coords, residual] = a.basis->project(comm);
  if (residual > 1e-10 * std::max(1.0, comm.norm()))
    throw NotAdClosed("bracket: commutator leaves the generator span");
  return AlgebraVector(a.basis, coords);
}

}  // namespace orbit
