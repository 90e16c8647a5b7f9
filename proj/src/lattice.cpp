#include "lattice.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

Lattice::Lattice(QuadraticSpace amb, std::vector<QVec> b)
    : ambient(std::move(amb)), basis(std::move(b)) {
  for (const auto& v : basis)
    if (static_cast<int>(v.size()) != ambient.dim)
      throw std::invalid_argument("lattice basis vector dimension mismatch");
  if (!basis.empty()) {
    QMat m = QMat::from_rows(basis);
    if (denseorbit::rank(m) != static_cast<int>(basis.size()))
      throw std::invalid_argument("lattice basis not independent");
  }
}

QMat Lattice::gram_on_basis() const {
  int r = rank();
  QMat g(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) {
      Rat x = inner(ambient, basis[i], basis[j]);
      g.at(i, j) = x;
      g.at(j, i) = x;
    }
  return g;
}

std::optional<QVec> Lattice::coords(const QVec& v) const {
  if (basis.empty()) return is_zero_vec(v) ? std::optional<QVec>(QVec{}) : std::nullopt;
  return solve(basis_matrix(), v);
}

bool Lattice::contains(const QVec& v) const {
  auto c = coords(v);
  if (!c) return false;
  return std::all_of(c->begin(), c->end(), [](const Rat& x) { return x.get_den() == 1; });
}

Subspace Lattice::rational_span() const { return Subspace::span(ambient.dim, basis); }

std::vector<QVec> canonical_lattice_basis(int ambient_dim, const std::vector<QVec>& gens) {
  if (gens.empty()) return {};
  Int d = 1;
  for (const auto& v : gens)
    for (const auto& x : v) mpz_lcm(d.get_mpz_t(), d.get_mpz_t(), x.get_den().get_mpz_t());
  ZMat rows(static_cast<int>(gens.size()), ambient_dim);
  for (size_t i = 0; i < gens.size(); ++i)
    for (int j = 0; j < ambient_dim; ++j) {
      Rat scaled = gens[i][j] * Rat(d);
      rows.at(static_cast<int>(i), j) = scaled.get_num();
    }
  ZMat h = hnf_rows(rows);
  std::vector<QVec> out;
  for (int i = 0; i < h.rows; ++i) {
    QVec v(ambient_dim);
    for (int j = 0; j < ambient_dim; ++j) {
      v[j] = Rat(h.at(i, j), d);
      v[j].canonicalize();
    }
    out.push_back(std::move(v));
  }
  return out;
}

Lattice saturate(const Lattice& l, const Subspace& w) {
  if (w.ambient_dim != l.ambient.dim) throw std::invalid_argument("ambient dimension mismatch");
  if (l.rank() == 0 || w.rank() == 0) return Lattice(l.ambient, {});
  // Functionals vanishing on W (dot-product annihilator).
  std::vector<QVec> ann = kernel(QMat::from_rows(w.basis));
  if (ann.empty()) return l;  // W is everything
  // Rows: functional applied to each lattice basis vector; integer-scaled.
  ZMat m(static_cast<int>(ann.size()), l.rank());
  for (size_t i = 0; i < ann.size(); ++i) {
    QVec row(l.rank());
    Int d = 1;
    for (int j = 0; j < l.rank(); ++j) {
      Rat acc = 0;
      for (int k = 0; k < l.ambient.dim; ++k) acc += ann[i][k] * l.basis[j][k];
      row[j] = acc;
      mpz_lcm(d.get_mpz_t(), d.get_mpz_t(), acc.get_den().get_mpz_t());
    }
    for (int j = 0; j < l.rank(); ++j) m.at(static_cast<int>(i), j) = Rat(row[j] * Rat(d)).get_num();
  }
  std::vector<ZVec> ker = integer_kernel(m);
  std::vector<QVec> vecs;
  for (const auto& c : ker) {
    QVec v(l.ambient.dim, Rat(0));
    for (int j = 0; j < l.rank(); ++j)
      if (c[j] != 0) v = add_vec(v, scale_vec(l.basis[j], Rat(c[j])));
    vecs.push_back(std::move(v));
  }
  return Lattice(l.ambient, canonical_lattice_basis(l.ambient.dim, vecs));
}

Lattice lattice_sum(const Lattice& a, const Lattice& b) {
  if (a.ambient.dim != b.ambient.dim || !(a.ambient.gram == b.ambient.gram))
    throw std::invalid_argument("lattice sum over different ambient spaces");
  std::vector<QVec> gens = a.basis;
  gens.insert(gens.end(), b.basis.begin(), b.basis.end());
  return Lattice(a.ambient, canonical_lattice_basis(a.ambient.dim, gens));
}

Lattice lattice_intersect(const Lattice& a, const Lattice& b) {
  if (a.ambient.dim != b.ambient.dim || !(a.ambient.gram == b.ambient.gram))
    throw std::invalid_argument("lattice intersection over different ambient spaces");
  if (a.rank() == 0 || b.rank() == 0) return Lattice(a.ambient, {});
  int n = a.ambient.dim, ra = a.rank(), rb = b.rank();
  Int d = 1;
  auto lcm_dens = [&](const std::vector<QVec>& vs) {
    for (const auto& v : vs)
      for (const auto& x : v) mpz_lcm(d.get_mpz_t(), d.get_mpz_t(), x.get_den().get_mpz_t());
  };
  lcm_dens(a.basis);
  lcm_dens(b.basis);
  ZMat m(n, ra + rb);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ra; ++j) m.at(i, j) = Rat(a.basis[j][i] * Rat(d)).get_num();
    for (int j = 0; j < rb; ++j) m.at(i, ra + j) = Rat(-b.basis[j][i] * Rat(d)).get_num();
  }
  std::vector<ZVec> ker = integer_kernel(m);
  std::vector<QVec> vecs;
  for (const auto& st : ker) {
    QVec v(n, Rat(0));
    for (int j = 0; j < ra; ++j)
      if (st[j] != 0) v = add_vec(v, scale_vec(a.basis[j], Rat(st[j])));
    vecs.push_back(std::move(v));
  }
  return Lattice(a.ambient, canonical_lattice_basis(n, vecs));
}

IndexResult index_in(const Lattice& sub, const Lattice& sup) {
  QMat c(sup.rank(), sub.rank());
  for (int j = 0; j < sub.rank(); ++j) {
    auto co = sup.coords(sub.basis[j]);
    if (!co) throw std::invalid_argument("sublattice not contained in rational span");
    for (int i = 0; i < sup.rank(); ++i) {
      if ((*co)[i].get_den() != 1)
        throw std::invalid_argument("sublattice not contained in lattice");
      c.at(i, j) = (*co)[i];
    }
  }
  IndexResult r;
  if (sub.rank() < sup.rank()) {
    r.finite = false;
    return r;
  }
  Rat det = determinant(c);
  r.finite = det != 0;
  if (r.finite) r.index = abs(det.get_num());
  return r;
}

ZMat lattice_action(const Lattice& l, const QMat& m) {
  ZMat act(l.rank(), l.rank());
  for (int j = 0; j < l.rank(); ++j) {
    QVec img = m * l.basis[j];
    auto co = l.coords(img);
    if (!co) throw std::invalid_argument("matrix does not preserve the rational span");
    for (int i = 0; i < l.rank(); ++i) {
      if ((*co)[i].get_den() != 1) throw std::invalid_argument("matrix not integral on lattice");
      act.at(i, j) = (*co)[i].get_num();
    }
  }
  return act;
}

bool is_integral_isometry(const Lattice& l, const QMat& m) {
  if (!is_isometry(l.ambient, m)) return false;
  try {
    ZMat act = lattice_action(l, m);
    Int d = zdet(act);
    return d == 1 || d == -1;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

bool is_integral_isometry(const Lattice& l, const QMat& m, const Lattice& sub) {
  if (!is_integral_isometry(l, m)) return false;
  try {
    ZMat act = lattice_action(sub, m);
    Int d = zdet(act);
    return d == 1 || d == -1;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

std::optional<IntegralIsometry> reflection_in_vector(const Lattice& l, const QVec& r) {
  QMat m = reflection_matrix(l.ambient, r);  // throws on isotropic r
  if (!is_integral_isometry(l, m)) return std::nullopt;
  IntegralIsometry iso;
  iso.ambient = m;
  iso.on_lattice = lattice_action(l, m);
  std::ostringstream os;
  os << "reflection r=" << vec_to_string(r);
  iso.provenance = os.str();
  return iso;
}

// --- presets ------------------------------------------------------------------

static std::vector<IntegralIsometry> short_vector_reflections(const Lattice& l, int height) {
  // All integral reflections in lattice vectors with |<r,r>| in {1,2} and
  // coordinates bounded by `height`, deduplicated by matrix, lexicographic
  // enumeration order.
  std::vector<IntegralIsometry> out;
  std::map<std::string, bool> seen;
  int n = l.ambient.dim;
  std::vector<int> c(n, -height);
  while (true) {
    QVec r(n);
    for (int i = 0; i < n; ++i) r[i] = c[i];
    if (!is_zero_vec(r)) {
      Rat nn = norm2(l.ambient, r);
      if (nn == 1 || nn == 2) {
        auto iso = reflection_in_vector(l, r);
        if (iso) {
          std::string key = matrix_to_string(iso->ambient);
          if (!seen.count(key)) {
            seen[key] = true;
            out.push_back(std::move(*iso));
          }
        }
      }
    }
    int i = n - 1;
    while (i >= 0 && c[i] == height) { c[i] = -height; --i; }
    if (i < 0) break;
    ++c[i];
  }
  return out;
}

static QMat e8_gram_negated() {
  // Negated Cartan matrix of the T(4,2,1) tree: chain 0-1-2-3-4-5-6 with node 7
  // attached to node 4. Even, unimodular, negative definite.
  QMat g(8, 8);
  for (int i = 0; i < 8; ++i) g.at(i, i) = -2;
  auto edge = [&](int i, int j) {
    g.at(i, j) = 1;
    g.at(j, i) = 1;
  };
  for (int i = 0; i < 6; ++i) edge(i, i + 1);
  edge(4, 7);
  return g;
}

static Lattice identity_basis_lattice(QuadraticSpace s) {
  std::vector<QVec> basis;
  for (int i = 0; i < s.dim; ++i) {
    QVec e(s.dim, Rat(0));
    e[i] = 1;
    basis.push_back(std::move(e));
  }
  return Lattice(std::move(s), std::move(basis));
}

Preset preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "minkowski-2-1") {
    p.lattice = identity_basis_lattice(QuadraticSpace::diagonal({Rat(1), Rat(1), Rat(-1)}));
    p.generators = short_vector_reflections(p.lattice, 3);
  } else if (name == "minkowski-3-1") {
    p.lattice = identity_basis_lattice(QuadraticSpace::diagonal({Rat(1), Rat(1), Rat(1), Rat(-1)}));
    p.generators = short_vector_reflections(p.lattice, 3);
  } else if (name == "U") {
    QMat g(2, 2);
    g.at(0, 1) = 1;
    g.at(1, 0) = 1;
    p.lattice = identity_basis_lattice(QuadraticSpace(2, g));
    for (const QVec& r : {QVec{Rat(1), Rat(-1)}, QVec{Rat(1), Rat(1)}}) {
      auto iso = reflection_in_vector(p.lattice, r);
      if (!iso) throw std::logic_error("hyperbolic plane reflection not integral");
      p.generators.push_back(std::move(*iso));
    }
  } else if (name == "k3") {
    QMat g(22, 22);
    QMat u(2, 2);
    u.at(0, 1) = 1;
    u.at(1, 0) = 1;
    QMat e8 = e8_gram_negated();
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) g.at(2 * b + i, 2 * b + j) = u.at(i, j);
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) g.at(6 + 8 * b + i, 6 + 8 * b + j) = e8.at(i, j);
    p.lattice = identity_basis_lattice(QuadraticSpace(22, g));
    // No finite canonical generating set is provided; callers harvest
    // reflections adapted to the subspaces they work in.
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return p;
}

std::vector<std::string> preset_names() { return {"U", "k3", "minkowski-2-1", "minkowski-3-1"}; }

}  // namespace denseorbit
