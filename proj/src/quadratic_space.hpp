#pragma once

#include <string>
#include <vector>

#include "qmatrix.hpp"

namespace denseorbit {

struct Signature {
  int plus = 0, minus = 0, zero = 0;
  bool operator==(const Signature&) const = default;
  std::string to_string() const;
};

// Rational quadratic space: dimension + symmetric Gram matrix.
struct QuadraticSpace {
  int dim = 0;
  QMat gram;

  QuadraticSpace() = default;
  QuadraticSpace(int d, QMat g);  // throws on shape/symmetry violation

  static QuadraticSpace diagonal(const QVec& entries);
};

Rat inner(const QuadraticSpace& s, const QVec& v, const QVec& w);
inline Rat norm2(const QuadraticSpace& s, const QVec& v) { return inner(s, v, v); }

// Linear subspace in canonical form: reduced row echelon basis with cleared
// denominators (primitive integer vectors, positive leading entries).
struct Subspace {
  int ambient_dim = 0;
  std::vector<QVec> basis;

  static Subspace span(int ambient_dim, const std::vector<QVec>& vecs);
  int rank() const { return static_cast<int>(basis.size()); }
  bool contains(const QVec& v) const;
  bool contains(const Subspace& other) const;
  bool operator==(const Subspace& o) const { return ambient_dim == o.ambient_dim && basis == o.basis; }
  std::string to_string() const;
};

Subspace subspace_sum(const Subspace& a, const Subspace& b);
Subspace subspace_intersect(const Subspace& a, const Subspace& b);

// Congruence diagonalization: transform.T * gram * transform is diagonal with
// positive entries first, then negative, then zero.
struct Diagonalization {
  QMat transform;
  QVec diag;
};
Diagonalization diagonalize(const QuadraticSpace& s);

Signature signature(const QuadraticSpace& s);
Signature signature_on(const QuadraticSpace& s, const Subspace& w);

Subspace orthogonal_complement(const QuadraticSpace& s, const Subspace& w);

// Gram matrix of the form restricted to w, on w's canonical basis.
QuadraticSpace restrict_form(const QuadraticSpace& s, const Subspace& w);

// v - 2<v,r>/<r,r> r. Throws std::domain_error when <r,r> = 0.
QVec reflect(const QuadraticSpace& s, const QVec& r, const QVec& v);
QMat reflection_matrix(const QuadraticSpace& s, const QVec& r);

bool is_isometry(const QuadraticSpace& s, const QMat& m);

QVec scale_vec(const QVec& v, const Rat& c);
QVec add_vec(const QVec& a, const QVec& b);
QVec sub_vec(const QVec& a, const QVec& b);
bool is_zero_vec(const QVec& v);
// Primitive integer representative of the line through v, deterministic sign
// (first nonzero coordinate positive).
QVec primitive_vector(const QVec& v);
bool proportional(const QVec& a, const QVec& b);

}  // namespace denseorbit
