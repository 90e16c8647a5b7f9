#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rational.hpp"

namespace denseorbit {

// Dense rational matrix, row-major.
struct QMat {
  int rows = 0, cols = 0;
  std::vector<Rat> a;

  QMat() = default;
  QMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, Rat(0)) {}

  Rat& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  const Rat& at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static QMat identity(int n);
  static QMat from_rows(const std::vector<QVec>& rows);
  static QMat from_cols(const std::vector<QVec>& cols);

  QVec row(int i) const;
  QVec col(int j) const;
  std::vector<QVec> row_list() const;
  std::vector<QVec> col_list() const;

  bool operator==(const QMat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

QMat operator*(const QMat& x, const QMat& y);
QVec operator*(const QMat& x, const QVec& v);
QMat operator+(const QMat& x, const QMat& y);
QMat operator-(const QMat& x, const QMat& y);
QMat transpose(const QMat& m);
QMat scale(const QMat& m, const Rat& c);
bool is_zero(const QMat& m);
bool is_symmetric(const QMat& m);
bool is_integer_matrix(const QMat& m);
std::string matrix_to_string(const QMat& m);

// Reduced row echelon form in place; returns the rank.
int rref(QMat& m);

int rank(QMat m);
Rat determinant(QMat m);           // square only
QMat inverse(const QMat& m);       // throws std::domain_error if singular

// Basis of { x : m x = 0 }.
std::vector<QVec> kernel(const QMat& m);

// One solution of A x = b, or nullopt if inconsistent.
std::optional<QVec> solve(const QMat& A, const QVec& b);

// --- integer matrices -------------------------------------------------------

struct ZMat {
  int rows = 0, cols = 0;
  std::vector<Int> a;

  ZMat() = default;
  ZMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, Int(0)) {}

  Int& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  const Int& at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static ZMat identity(int n);
  bool operator==(const ZMat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

ZMat zmat_from_qmat(const QMat& m);  // throws if any entry is non-integer
QMat qmat_from_zmat(const ZMat& m);

// Row-style Hermite normal form of the row span: pivots positive, entries
// above a pivot reduced into [0, pivot), zero rows dropped. Canonical for the
// row lattice.
ZMat hnf_rows(const ZMat& m);

// Basis of the integer kernel { x in Z^cols : m x = 0 }.
std::vector<ZVec> integer_kernel(const ZMat& m);

// Nonzero Smith invariant factors d_1 | d_2 | ..., all positive.
std::vector<Int> smith_divisors(ZMat m);

Int zdet(const ZMat& m);

}  // namespace denseorbit
