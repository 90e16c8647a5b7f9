#include "qmatrix.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

QMat QMat::identity(int n) {
  QMat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

QMat QMat::from_rows(const std::vector<QVec>& rows) {
  if (rows.empty()) return QMat();
  QMat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != m.cols)
      throw std::invalid_argument("ragged rows");
    for (int j = 0; j < m.cols; ++j) m.at(i, j) = rows[i][j];
  }
  return m;
}

QMat QMat::from_cols(const std::vector<QVec>& cols) { return transpose(from_rows(cols)); }

QVec QMat::row(int i) const {
  QVec v(cols);
  for (int j = 0; j < cols; ++j) v[j] = at(i, j);
  return v;
}

QVec QMat::col(int j) const {
  QVec v(rows);
  for (int i = 0; i < rows; ++i) v[i] = at(i, j);
  return v;
}

std::vector<QVec> QMat::row_list() const {
  std::vector<QVec> out;
  out.reserve(rows);
  for (int i = 0; i < rows; ++i) out.push_back(row(i));
  return out;
}

std::vector<QVec> QMat::col_list() const {
  std::vector<QVec> out;
  out.reserve(cols);
  for (int j = 0; j < cols; ++j) out.push_back(col(j));
  return out;
}

QMat operator*(const QMat& x, const QMat& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matrix product shape mismatch");
  QMat z(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const Rat& c = x.at(i, k);
      if (c == 0) continue;
      for (int j = 0; j < y.cols; ++j) z.at(i, j) += c * y.at(k, j);
    }
  return z;
}

QVec operator*(const QMat& x, const QVec& v) {
  if (x.cols != static_cast<int>(v.size()))
    throw std::invalid_argument("matrix-vector shape mismatch");
  QVec out(x.rows, Rat(0));
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j)
      if (x.at(i, j) != 0) out[i] += x.at(i, j) * v[j];
  return out;
}

QMat operator+(const QMat& x, const QMat& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("shape mismatch");
  QMat z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] += y.a[i];
  return z;
}

QMat operator-(const QMat& x, const QMat& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("shape mismatch");
  QMat z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] -= y.a[i];
  return z;
}

QMat transpose(const QMat& m) {
  QMat t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

QMat scale(const QMat& m, const Rat& c) {
  QMat z = m;
  for (auto& x : z.a) x *= c;
  return z;
}

bool is_zero(const QMat& m) {
  return std::all_of(m.a.begin(), m.a.end(), [](const Rat& x) { return x == 0; });
}

bool is_symmetric(const QMat& m) {
  if (m.rows != m.cols) return false;
  for (int i = 0; i < m.rows; ++i)
    for (int j = i + 1; j < m.cols; ++j)
      if (m.at(i, j) != m.at(j, i)) return false;
  return true;
}

bool is_integer_matrix(const QMat& m) {
  return std::all_of(m.a.begin(), m.a.end(), [](const Rat& x) { return x.get_den() == 1; });
}

std::string matrix_to_string(const QMat& m) {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < m.rows; ++i) {
    if (i) os << "; ";
    for (int j = 0; j < m.cols; ++j) {
      if (j) os << " ";
      os << rat_to_string(m.at(i, j));
    }
  }
  os << "]";
  return os.str();
}

int rref(QMat& m) {
  int lead = 0;
  for (int r = 0; r < m.rows && lead < m.cols; ++r) {
    int pivot = -1;
    while (lead < m.cols) {
      for (int i = r; i < m.rows; ++i)
        if (m.at(i, lead) != 0) { pivot = i; break; }
      if (pivot >= 0) break;
      ++lead;
    }
    if (pivot < 0) return r;
    if (pivot != r)
      for (int j = 0; j < m.cols; ++j) std::swap(m.at(pivot, j), m.at(r, j));
    Rat p = m.at(r, lead);
    for (int j = lead; j < m.cols; ++j) m.at(r, j) /= p;
    for (int i = 0; i < m.rows; ++i) {
      if (i == r) continue;
      Rat c = m.at(i, lead);
      if (c == 0) continue;
      for (int j = lead; j < m.cols; ++j) m.at(i, j) -= c * m.at(r, j);
    }
    ++lead;
    if (lead >= m.cols) return r + 1;
  }
  // Count nonzero rows.
  int rk = 0;
  for (int i = 0; i < m.rows; ++i) {
    bool nz = false;
    for (int j = 0; j < m.cols; ++j)
      if (m.at(i, j) != 0) { nz = true; break; }
    if (nz) ++rk;
  }
  return rk;
}

int rank(QMat m) { return rref(m); }

Rat determinant(QMat m) {
  if (m.rows != m.cols) throw std::invalid_argument("determinant of non-square matrix");
  Rat det = 1;
  int n = m.rows;
  for (int k = 0; k < n; ++k) {
    int pivot = -1;
    for (int i = k; i < n; ++i)
      if (m.at(i, k) != 0) { pivot = i; break; }
    if (pivot < 0) return Rat(0);
    if (pivot != k) {
      for (int j = 0; j < n; ++j) std::swap(m.at(pivot, j), m.at(k, j));
      det = -det;
    }
    det *= m.at(k, k);
    Rat inv = Rat(1) / m.at(k, k);
    for (int i = k + 1; i < n; ++i) {
      Rat c = m.at(i, k) * inv;
      if (c == 0) continue;
      for (int j = k; j < n; ++j) m.at(i, j) -= c * m.at(k, j);
    }
  }
  return det;
}

QMat inverse(const QMat& m) {
  if (m.rows != m.cols) throw std::invalid_argument("inverse of non-square matrix");
  int n = m.rows;
  QMat aug(n, 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aug.at(i, j) = m.at(i, j);
    aug.at(i, n + i) = 1;
  }
  if (rref(aug) != n) throw std::domain_error("singular matrix");
  QMat inv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) inv.at(i, j) = aug.at(i, n + j);
  return inv;
}

std::vector<QVec> kernel(const QMat& m) {
  QMat r = m;
  rref(r);
  std::vector<int> pivot_col;
  std::vector<bool> is_pivot(m.cols, false);
  for (int i = 0; i < r.rows; ++i) {
    for (int j = 0; j < r.cols; ++j)
      if (r.at(i, j) != 0) {
        pivot_col.push_back(j);
        is_pivot[j] = true;
        break;
      }
  }
  std::vector<QVec> basis;
  for (int j = 0; j < m.cols; ++j) {
    if (is_pivot[j]) continue;
    QVec v(m.cols, Rat(0));
    v[j] = 1;
    for (size_t i = 0; i < pivot_col.size(); ++i) v[pivot_col[i]] = -r.at(static_cast<int>(i), j);
    basis.push_back(std::move(v));
  }
  return basis;
}

std::optional<QVec> solve(const QMat& A, const QVec& b) {
  if (A.rows != static_cast<int>(b.size())) throw std::invalid_argument("solve shape mismatch");
  QMat aug(A.rows, A.cols + 1);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) aug.at(i, j) = A.at(i, j);
    aug.at(i, A.cols) = b[i];
  }
  rref(aug);
  QVec x(A.cols, Rat(0));
  for (int i = 0; i < aug.rows; ++i) {
    int lead = -1;
    for (int j = 0; j <= A.cols; ++j)
      if (aug.at(i, j) != 0) { lead = j; break; }
    if (lead < 0) continue;
    if (lead == A.cols) return std::nullopt;  // 0 = nonzero
    x[lead] = aug.at(i, A.cols);
    // Free variables stay 0; subtract their (zero) contribution — nothing to do.
    for (int j = lead + 1; j < A.cols; ++j)
      if (aug.at(i, j) != 0 && x[j] != 0) x[lead] -= aug.at(i, j) * x[j];
  }
  return x;
}

// --- integer matrices -------------------------------------------------------

ZMat ZMat::identity(int n) {
  ZMat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

ZMat zmat_from_qmat(const QMat& m) {
  ZMat z(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) {
      const Rat& q = m.at(i, j);
      if (q.get_den() != 1) throw std::invalid_argument("non-integer entry");
      z.at(i, j) = q.get_num();
    }
  return z;
}

QMat qmat_from_zmat(const ZMat& m) {
  QMat q(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) q.at(i, j) = Rat(m.at(i, j));
  return q;
}

ZMat hnf_rows(const ZMat& m) {
  ZMat h = m;
  int row = 0;
  for (int col = 0; col < h.cols && row < h.rows; ++col) {
    // Clear column `col` below `row` by gcd steps.
    while (true) {
      int best = -1;
      for (int i = row; i < h.rows; ++i) {
        if (h.at(i, col) == 0) continue;
        if (best < 0 || cmp(abs(h.at(i, col)), abs(h.at(best, col))) < 0) best = i;
      }
      if (best < 0) break;
      if (best != row)
        for (int j = 0; j < h.cols; ++j) std::swap(h.at(best, j), h.at(row, j));
      bool done = true;
      for (int i = row + 1; i < h.rows; ++i) {
        if (h.at(i, col) == 0) continue;
        Int q;
        mpz_fdiv_q(q.get_mpz_t(), h.at(i, col).get_mpz_t(), h.at(row, col).get_mpz_t());
        if (q != 0)
          for (int j = 0; j < h.cols; ++j) h.at(i, j) -= q * h.at(row, j);
        if (h.at(i, col) != 0) done = false;
      }
      if (done) break;
    }
    if (h.at(row, col) == 0) continue;
    if (h.at(row, col) < 0)
      for (int j = 0; j < h.cols; ++j) h.at(row, j) = -h.at(row, j);
    // Reduce entries above the pivot into [0, pivot).
    for (int i = 0; i < row; ++i) {
      Int q;
      mpz_fdiv_q(q.get_mpz_t(), h.at(i, col).get_mpz_t(), h.at(row, col).get_mpz_t());
      if (q != 0)
        for (int j = 0; j < h.cols; ++j) h.at(i, j) -= q * h.at(row, j);
    }
    ++row;
  }
  ZMat out(row, h.cols);
  for (int i = 0; i < row; ++i)
    for (int j = 0; j < h.cols; ++j) out.at(i, j) = h.at(i, j);
  return out;
}

std::vector<ZVec> integer_kernel(const ZMat& m) {
  // Column reduction with a recorded transform: columns of U with zero image
  // span the kernel saturatedly (U unimodular).
  ZMat a = m;
  ZMat u = ZMat::identity(m.cols);
  int lead = 0;
  for (int r = 0; r < a.rows && lead < a.cols; ++r) {
    while (true) {
      int best = -1;
      for (int j = lead; j < a.cols; ++j) {
        if (a.at(r, j) == 0) continue;
        if (best < 0 || cmp(abs(a.at(r, j)), abs(a.at(r, best))) < 0) best = j;
      }
      if (best < 0) break;
      if (best != lead) {
        for (int i = 0; i < a.rows; ++i) std::swap(a.at(i, best), a.at(i, lead));
        for (int i = 0; i < u.rows; ++i) std::swap(u.at(i, best), u.at(i, lead));
      }
      bool done = true;
      for (int j = lead + 1; j < a.cols; ++j) {
        if (a.at(r, j) == 0) continue;
        Int q;
        mpz_fdiv_q(q.get_mpz_t(), a.at(r, j).get_mpz_t(), a.at(r, lead).get_mpz_t());
        if (q != 0) {
          for (int i = 0; i < a.rows; ++i) a.at(i, j) -= q * a.at(i, lead);
          for (int i = 0; i < u.rows; ++i) u.at(i, j) -= q * u.at(i, lead);
        }
        if (a.at(r, j) != 0) done = false;
      }
      if (done) break;
    }
    if (a.at(r, lead) != 0) ++lead;
  }
  std::vector<ZVec> out;
  for (int j = lead; j < a.cols; ++j) {
    bool zero = true;
    for (int i = 0; i < a.rows; ++i)
      if (a.at(i, j) != 0) { zero = false; break; }
    if (!zero) continue;
    ZVec v(u.rows);
    for (int i = 0; i < u.rows; ++i) v[i] = u.at(i, j);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Int> smith_divisors(ZMat m) {
  int n = std::min(m.rows, m.cols);
  std::vector<Int> divs;
  int t = 0;  // current corner
  while (t < n) {
    // Find a nonzero pivot in the trailing block.
    int pi = -1, pj = -1;
    for (int i = t; i < m.rows && pi < 0; ++i)
      for (int j = t; j < m.cols; ++j)
        if (m.at(i, j) != 0) { pi = i; pj = j; break; }
    if (pi < 0) break;
    for (int j = 0; j < m.cols; ++j) std::swap(m.at(pi, j), m.at(t, j));
    for (int i = 0; i < m.rows; ++i) std::swap(m.at(i, pj), m.at(i, t));
    while (true) {
      // Reduce column t.
      bool col_clear = true;
      for (int i = t + 1; i < m.rows; ++i) {
        if (m.at(i, t) == 0) continue;
        Int q;
        mpz_fdiv_q(q.get_mpz_t(), m.at(i, t).get_mpz_t(), m.at(t, t).get_mpz_t());
        for (int j = 0; j < m.cols; ++j) m.at(i, j) -= q * m.at(t, j);
        if (m.at(i, t) != 0) {
          for (int j = 0; j < m.cols; ++j) std::swap(m.at(i, j), m.at(t, j));
          col_clear = false;
        }
      }
      if (!col_clear) continue;
      bool row_clear = true;
      for (int j = t + 1; j < m.cols; ++j) {
        if (m.at(t, j) == 0) continue;
        Int q;
        mpz_fdiv_q(q.get_mpz_t(), m.at(t, j).get_mpz_t(), m.at(t, t).get_mpz_t());
        for (int i = 0; i < m.rows; ++i) m.at(i, j) -= q * m.at(i, t);
        if (m.at(t, j) != 0) {
          for (int i = 0; i < m.rows; ++i) std::swap(m.at(i, j), m.at(i, t));
          row_clear = false;
        }
      }
      if (row_clear) break;
    }
    // Enforce divisibility of the remaining block by the pivot.
    bool restart = false;
    for (int i = t + 1; i < m.rows && !restart; ++i)
      for (int j = t + 1; j < m.cols; ++j)
        if (m.at(i, j) % m.at(t, t) != 0) {
          for (int jj = 0; jj < m.cols; ++jj) m.at(t, jj) += m.at(i, jj);
          restart = true;
          break;
        }
    if (restart) continue;
    divs.push_back(abs(m.at(t, t)));
    ++t;
  }
  return divs;
}

Int zdet(const ZMat& m) {
  Rat d = determinant(qmat_from_zmat(m));
  return d.get_num();
}

}  // namespace denseorbit
