#include "quadratic_space.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

std::string Signature::to_string() const {
  std::ostringstream os;
  os << "(" << plus << "," << minus;
  if (zero) os << "," << zero;
  os << ")";
  return os.str();
}

QuadraticSpace::QuadraticSpace(int d, QMat g) : dim(d), gram(std::move(g)) {
  if (gram.rows != dim || gram.cols != dim)
    throw std::invalid_argument("gram matrix shape does not match dimension");
  if (!is_symmetric(gram)) throw std::invalid_argument("gram matrix not symmetric");
}

QuadraticSpace QuadraticSpace::diagonal(const QVec& entries) {
  int n = static_cast<int>(entries.size());
  QMat g(n, n);
  for (int i = 0; i < n; ++i) g.at(i, i) = entries[i];
  return QuadraticSpace(n, g);
}

Rat inner(const QuadraticSpace& s, const QVec& v, const QVec& w) {
  if (static_cast<int>(v.size()) != s.dim || static_cast<int>(w.size()) != s.dim)
    throw std::invalid_argument("vector dimension mismatch");
  Rat acc = 0;
  for (int i = 0; i < s.dim; ++i) {
    if (v[i] == 0) continue;
    Rat row = 0;
    for (int j = 0; j < s.dim; ++j)
      if (s.gram.at(i, j) != 0 && w[j] != 0) row += s.gram.at(i, j) * w[j];
    acc += v[i] * row;
  }
  return acc;
}

QVec scale_vec(const QVec& v, const Rat& c) {
  QVec out = v;
  for (auto& x : out) x *= c;
  return out;
}

QVec add_vec(const QVec& a, const QVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vector size mismatch");
  QVec out = a;
  for (size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

QVec sub_vec(const QVec& a, const QVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vector size mismatch");
  QVec out = a;
  for (size_t i = 0; i < b.size(); ++i) out[i] -= b[i];
  return out;
}

bool is_zero_vec(const QVec& v) {
  return std::all_of(v.begin(), v.end(), [](const Rat& x) { return x == 0; });
}

QVec primitive_vector(const QVec& v) {
  if (is_zero_vec(v)) throw std::invalid_argument("primitive vector of zero");
  Int lcm_den = 1;
  for (const auto& x : v) mpz_lcm(lcm_den.get_mpz_t(), lcm_den.get_mpz_t(), x.get_den().get_mpz_t());
  ZVec z(v.size());
  Int g = 0;
  for (size_t i = 0; i < v.size(); ++i) {
    Rat scaled = v[i] * Rat(lcm_den);
    z[i] = scaled.get_num();
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), z[i].get_mpz_t());
  }
  int sign = 0;
  for (const auto& x : z)
    if (x != 0) { sign = sgn(x); break; }
  QVec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = Rat(sign < 0 ? Int(-z[i] / g) : Int(z[i] / g));
  return out;
}

bool proportional(const QVec& a, const QVec& b) {
  if (a.size() != b.size()) return false;
  if (is_zero_vec(a) || is_zero_vec(b)) return is_zero_vec(a) && is_zero_vec(b);
  return primitive_vector(a) == primitive_vector(b);
}

// --- Subspace ----------------------------------------------------------------

static QVec clear_denominators_row(const QVec& v) { return primitive_vector(v); }

Subspace Subspace::span(int ambient_dim, const std::vector<QVec>& vecs) {
  for (const auto& v : vecs)
    if (static_cast<int>(v.size()) != ambient_dim)
      throw std::invalid_argument("subspace vector dimension mismatch");
  Subspace s;
  s.ambient_dim = ambient_dim;
  if (vecs.empty()) return s;
  QMat m = QMat::from_rows(vecs);
  int rk = rref(m);
  for (int i = 0; i < rk; ++i) s.basis.push_back(clear_denominators_row(m.row(i)));
  return s;
}

bool Subspace::contains(const QVec& v) const {
  if (static_cast<int>(v.size()) != ambient_dim)
    throw std::invalid_argument("vector dimension mismatch");
  if (is_zero_vec(v)) return true;
  // Reduce v against the echelon basis.
  QVec w = v;
  for (const auto& b : basis) {
    int lead = -1;
    for (int j = 0; j < ambient_dim; ++j)
      if (b[j] != 0) { lead = j; break; }
    if (lead < 0) continue;
    if (w[lead] != 0) {
      Rat c = w[lead] / b[lead];
      for (int j = 0; j < ambient_dim; ++j) w[j] -= c * b[j];
    }
  }
  return is_zero_vec(w);
}

bool Subspace::contains(const Subspace& other) const {
  return std::all_of(other.basis.begin(), other.basis.end(),
                     [&](const QVec& v) { return contains(v); });
}

std::string Subspace::to_string() const {
  std::ostringstream os;
  os << "span{";
  for (size_t i = 0; i < basis.size(); ++i) {
    if (i) os << ", ";
    os << vec_to_string(basis[i]);
  }
  os << "}";
  return os.str();
}

Subspace subspace_sum(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim != b.ambient_dim) throw std::invalid_argument("ambient dimension mismatch");
  std::vector<QVec> all = a.basis;
  all.insert(all.end(), b.basis.begin(), b.basis.end());
  return Subspace::span(a.ambient_dim, all);
}

Subspace subspace_intersect(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim != b.ambient_dim) throw std::invalid_argument("ambient dimension mismatch");
  int ra = a.rank(), rb = b.rank();
  if (ra == 0 || rb == 0) return Subspace::span(a.ambient_dim, {});
  // x = A s = B t; kernel of [A^T | -B^T] gives the (s, t) pairs.
  QMat m(a.ambient_dim, ra + rb);
  for (int i = 0; i < a.ambient_dim; ++i) {
    for (int j = 0; j < ra; ++j) m.at(i, j) = a.basis[j][i];
    for (int j = 0; j < rb; ++j) m.at(i, ra + j) = -b.basis[j][i];
  }
  std::vector<QVec> ker = kernel(m);
  std::vector<QVec> gens;
  for (const auto& st : ker) {
    QVec x(a.ambient_dim, Rat(0));
    for (int j = 0; j < ra; ++j)
      if (st[j] != 0) x = add_vec(x, scale_vec(a.basis[j], st[j]));
    if (!is_zero_vec(x)) gens.push_back(std::move(x));
  }
  return Subspace::span(a.ambient_dim, gens);
}

// --- diagonalization ---------------------------------------------------------

Diagonalization diagonalize(const QuadraticSpace& s) {
  int n = s.dim;
  QMat g = s.gram;
  QMat t = QMat::identity(n);

  auto col_swap = [&](int i, int j) {
    for (int r = 0; r < n; ++r) std::swap(g.at(r, i), g.at(r, j));
    for (int r = 0; r < n; ++r) std::swap(g.at(i, r), g.at(j, r));
    for (int r = 0; r < n; ++r) std::swap(t.at(r, i), t.at(r, j));
  };
  // basis_i += c * basis_j
  auto col_addmul = [&](int i, int j, const Rat& c) {
    for (int r = 0; r < n; ++r) g.at(r, i) += c * g.at(r, j);
    for (int r = 0; r < n; ++r) g.at(i, r) += c * g.at(j, r);
    for (int r = 0; r < n; ++r) t.at(r, i) += c * t.at(r, j);
  };

  for (int k = 0; k < n; ++k) {
    if (g.at(k, k) == 0) {
      int j = -1;
      for (int i = k + 1; i < n; ++i)
        if (g.at(i, i) != 0) { j = i; break; }
      if (j >= 0) {
        col_swap(k, j);
      } else {
        for (int i = k + 1; i < n && j < 0; ++i)
          if (g.at(k, i) != 0) j = i;
        if (j < 0) continue;  // row is null
        col_addmul(k, j, Rat(1));  // now g(k,k) = 2 g(k,j) != 0
      }
    }
    Rat pivot = g.at(k, k);
    for (int i = k + 1; i < n; ++i) {
      if (g.at(k, i) == 0) continue;
      col_addmul(i, k, -g.at(k, i) / pivot);
    }
  }

  // Stable reorder: positive, negative, zero.
  std::vector<int> order;
  for (int i = 0; i < n; ++i)
    if (g.at(i, i) > 0) order.push_back(i);
  for (int i = 0; i < n; ++i)
    if (g.at(i, i) < 0) order.push_back(i);
  for (int i = 0; i < n; ++i)
    if (g.at(i, i) == 0) order.push_back(i);

  Diagonalization d;
  d.transform = QMat(n, n);
  d.diag.resize(n);
  for (int j = 0; j < n; ++j) {
    d.diag[j] = g.at(order[j], order[j]);
    for (int i = 0; i < n; ++i) d.transform.at(i, j) = t.at(i, order[j]);
  }
  return d;
}

Signature signature(const QuadraticSpace& s) {
  Diagonalization d = diagonalize(s);
  Signature sig;
  for (const auto& x : d.diag) {
    if (x > 0) ++sig.plus;
    else if (x < 0) ++sig.minus;
    else ++sig.zero;
  }
  return sig;
}

Signature signature_on(const QuadraticSpace& s, const Subspace& w) {
  return signature(restrict_form(s, w));
}

Subspace orthogonal_complement(const QuadraticSpace& s, const Subspace& w) {
  if (w.ambient_dim != s.dim) throw std::invalid_argument("ambient dimension mismatch");
  if (w.rank() == 0) {
    std::vector<QVec> full;
    QMat id = QMat::identity(s.dim);
    for (int i = 0; i < s.dim; ++i) full.push_back(id.row(i));
    return Subspace::span(s.dim, full);
  }
  QMat m(w.rank(), s.dim);
  for (int i = 0; i < w.rank(); ++i) {
    // row = b_i^T G
    for (int j = 0; j < s.dim; ++j) {
      Rat acc = 0;
      for (int k = 0; k < s.dim; ++k)
        if (w.basis[i][k] != 0 && s.gram.at(k, j) != 0) acc += w.basis[i][k] * s.gram.at(k, j);
      m.at(i, j) = acc;
    }
  }
  return Subspace::span(s.dim, kernel(m));
}

QuadraticSpace restrict_form(const QuadraticSpace& s, const Subspace& w) {
  if (w.ambient_dim != s.dim) throw std::invalid_argument("ambient dimension mismatch");
  int k = w.rank();
  QMat h(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      Rat x = inner(s, w.basis[i], w.basis[j]);
      h.at(i, j) = x;
      h.at(j, i) = x;
    }
  return QuadraticSpace(k, h);
}

QVec reflect(const QuadraticSpace& s, const QVec& r, const QVec& v) {
  Rat rr = norm2(s, r);
  if (rr == 0) throw std::domain_error("reflection in isotropic vector");
  Rat c = 2 * inner(s, v, r) / rr;
  return sub_vec(v, scale_vec(r, c));
}

QMat reflection_matrix(const QuadraticSpace& s, const QVec& r) {
  Rat rr = norm2(s, r);
  if (rr == 0) throw std::domain_error("reflection in isotropic vector");
  QMat m = QMat::identity(s.dim);
  // columns are images of basis vectors
  for (int j = 0; j < s.dim; ++j) {
    QVec e(s.dim, Rat(0));
    e[j] = 1;
    QVec img = reflect(s, r, e);
    for (int i = 0; i < s.dim; ++i) m.at(i, j) = img[i];
  }
  return m;
}

bool is_isometry(const QuadraticSpace& s, const QMat& m) {
  if (m.rows != s.dim || m.cols != s.dim) return false;
  return transpose(m) * s.gram * m == s.gram;
}

}  // namespace denseorbit
