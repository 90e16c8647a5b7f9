#include "reduction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

// --- plane distance -------------------------------------------------------------

static std::vector<std::vector<double>> orthonormalize(std::vector<std::vector<double>> v) {
  std::vector<std::vector<double>> q;
  for (auto& x : v) {
    for (const auto& u : q) {
      double d = 0;
      for (size_t i = 0; i < x.size(); ++i) d += x[i] * u[i];
      for (size_t i = 0; i < x.size(); ++i) x[i] -= d * u[i];
    }
    double n = 0;
    for (double c : x) n += c * c;
    n = std::sqrt(n);
    if (n < 1e-12) throw std::invalid_argument("plane basis numerically dependent");
    for (double& c : x) c /= n;
    q.push_back(x);
  }
  return q;
}

double plane_distance(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("plane dimension mismatch");
  if (a.empty()) return 0;
  if (a.size() > 2) throw std::invalid_argument("plane distance supports dimension <= 2");
  auto qa = orthonormalize(a), qb = orthonormalize(b);
  size_t k = qa.size(), n = qa[0].size();
  if (qb[0].size() != n) throw std::invalid_argument("ambient dimension mismatch");
  // M = Qa^T Qb, k x k
  double m[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) {
      double acc = 0;
      for (size_t t = 0; t < n; ++t) acc += qa[i][t] * qb[j][t];
      m[2 * i + j] = acc;
    }
  auto clamp_acos = [](double s) {
    s = std::min(1.0, std::max(-1.0, s));
    return std::acos(std::min(1.0, std::fabs(s)));
  };
  if (k == 1) {
    double t = clamp_acos(m[0]);
    return t;
  }
  // Closed-form singular values of the 2x2 matrix.
  double q1 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
  double det = m[0] * m[3] - m[1] * m[2];
  double root = std::sqrt(std::max(0.0, q1 * q1 - 4 * det * det));
  double s1 = std::sqrt(std::max(0.0, (q1 + root) / 2));
  double s2 = std::sqrt(std::max(0.0, (q1 - root) / 2));
  double t1 = clamp_acos(s1), t2 = clamp_acos(s2);
  return std::sqrt(t1 * t1 + t2 * t2);
}

static std::vector<std::vector<double>> to_float_basis(const Subspace& s) {
  std::vector<std::vector<double>> out;
  for (const auto& b : s.basis) {
    // Per-vector rescale: spans are projective, and word products can carry
    // entries far beyond double range.
    Rat m(0);
    for (const auto& x : b) {
      Rat a = abs(x);
      if (a > m) m = a;
    }
    std::vector<double> row;
    row.reserve(b.size());
    for (const auto& x : b) row.push_back(m == 0 ? 0.0 : rat_to_double(Rat(x / m)));
    out.push_back(std::move(row));
  }
  return out;
}

double plane_distance(const Subspace& a, const Subspace& b) {
  return plane_distance(to_float_basis(a), to_float_basis(b));
}

double plane_distance(const Subspace& a, const std::vector<std::vector<double>>& b) {
  return plane_distance(to_float_basis(a), b);
}

// --- rationalization --------------------------------------------------------------

RationalizedPlane rationalize_plane(const QuadraticSpace& s,
                                    const std::vector<std::vector<double>>& basis,
                                    const Int& denom_bound, const Signature& want) {
  if (basis.empty()) throw std::invalid_argument("empty plane basis");
  Int bound = denom_bound;
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<QVec> rat_basis;
    for (const auto& row : basis) {
      if (static_cast<int>(row.size()) != s.dim)
        throw std::invalid_argument("plane basis dimension mismatch");
      double scale = 0;
      for (double x : row) scale = std::max(scale, std::fabs(x));
      if (scale == 0) throw std::invalid_argument("zero vector in plane basis");
      QVec v(s.dim);
      for (int i = 0; i < s.dim; ++i) v[i] = rat_from_double(row[i] / scale, bound);
      rat_basis.push_back(std::move(v));
    }
    Subspace plane = Subspace::span(s.dim, rat_basis);
    if (plane.rank() == static_cast<int>(basis.size())) {
      Signature sig = signature_on(s, plane);
      if (sig == want) {
        RationalizedPlane out;
        out.plane = plane;
        out.distance = plane_distance(plane, basis);
        return out;
      }
    }
    bound *= 64;
  }
  throw std::runtime_error("rationalization failed to reach signature " + want.to_string());
}

// --- envelope ----------------------------------------------------------------------

static std::vector<QVec> envelope_pool(const Lattice& l) {
  std::vector<QVec> pool = l.basis;
  for (int i = 0; i < l.rank(); ++i)
    for (int j = i + 1; j < l.rank(); ++j) pool.push_back(add_vec(l.basis[i], l.basis[j]));
  for (int i = 0; i < l.rank(); ++i)
    for (int j = i + 1; j < l.rank(); ++j) pool.push_back(sub_vec(l.basis[i], l.basis[j]));
  return pool;
}

static bool extend_envelope(const QuadraticSpace& v, const std::vector<QVec>& pool,
                            Subspace current, Subspace& out) {
  if (current.rank() == 4) {
    if (signature_on(v, current) == Signature{3, 1, 0}) {
      out = current;
      return true;
    }
    return false;
  }
  for (const auto& cand : pool) {
    if (current.contains(cand)) continue;
    Subspace next = subspace_sum(current, Subspace::span(v.dim, {cand}));
    Signature sig = signature_on(v, next);
    if (sig.plus > 3 || sig.minus > 1) continue;
    if (extend_envelope(v, pool, next, out)) return true;
  }
  return false;
}

Subspace build_U0(const QuadraticSpace& v, const Lattice& l, const Subspace& c, const QVec& lvec) {
  std::vector<QVec> gens = c.basis;
  gens.push_back(lvec);
  Subspace start = Subspace::span(v.dim, gens);
  if (start.rank() > 4) throw std::invalid_argument("target plane plus vector exceeds dimension 4");
  if (v.dim == 4) {
    Signature sig = signature(v);
    if (!(sig == Signature{3, 1, 0})) throw std::invalid_argument("ambient space not (3,1)");
    std::vector<QVec> full;
    QMat id = QMat::identity(4);
    for (int i = 0; i < 4; ++i) full.push_back(id.row(i));
    return Subspace::span(4, full);
  }
  Subspace out;
  if (!extend_envelope(v, envelope_pool(l), start, out))
    throw std::runtime_error("could not extend to a (3,1) envelope");
  return out;
}

// --- split / dualize / restrict -------------------------------------------------------

SplitLattice split_lattice(const Lattice& m, const Subspace& w) {
  SplitLattice out;
  out.in_w = saturate(m, w);
  out.in_perp = saturate(m, orthogonal_complement(m.ambient, w));
  Lattice s = lattice_sum(out.in_w, out.in_perp);
  IndexResult idx = index_in(s, m);
  if (!idx.finite) throw std::logic_error("orthogonal split has infinite index");
  out.index = idx.index;
  return out;
}

Subspace dualize(const QuadraticSpace& u, const Subspace& c, const Signature& want) {
  Subspace d = orthogonal_complement(u, c);
  Signature sig = signature_on(u, d);
  if (!(sig == want))
    throw std::runtime_error("dual plane has signature " + sig.to_string() + ", expected " +
                             want.to_string());
  return d;
}

Subspace build_W(const QuadraticSpace& u, const QVec& l_u, const Subspace& g0) {
  Subspace w = subspace_sum(g0, Subspace::span(u.dim, {l_u}));
  if (w.rank() != 3) throw std::runtime_error("span of l and the dual plane is degenerate");
  Signature sig = signature_on(u, w);
  if (!(sig == Signature{2, 1, 0}))
    throw std::runtime_error("reduced space has signature " + sig.to_string());
  return w;
}

// --- reflection harvest ------------------------------------------------------------------

static QVec embed_vec(const QMat& embed, const QVec& coords) { return embed * coords; }

std::vector<Generator> harvest_reflections(const QuadraticSpace& space3, const Lattice& ambient,
                                           const QMat& embed_to_ambient, int height,
                                           int max_generators) {
  std::vector<Generator> out;
  std::vector<std::string> seen;
  bool identity_basis = true;
  {
    QMat b = ambient.basis_matrix();
    identity_basis = ambient.rank() == ambient.ambient.dim && b == QMat::identity(ambient.ambient.dim);
  }
  std::optional<QMat> basis_inv;
  if (!identity_basis && ambient.rank() == ambient.ambient.dim)
    basis_inv = inverse(ambient.basis_matrix());

  std::vector<int> c(3, -height);
  while (true) {
    do {
      Int g = 0;
      for (int x : c) mpz_gcd_ui(g.get_mpz_t(), g.get_mpz_t(), std::abs(x));
      if (g != 1) break;  // only primitive vectors; others give the same reflection
      QVec r{Rat(c[0]), Rat(c[1]), Rat(c[2])};
      Rat nn = norm2(space3, r);
      if (nn == 0) break;
      QMat mat3 = reflection_matrix(space3, r);
      if (!is_integer_matrix(mat3)) break;
      // Lift to the ambient lattice and demand integrality there.
      QVec r_amb = embed_vec(embed_to_ambient, r);
      QMat lift = reflection_matrix(ambient.ambient, r_amb);
      bool integral;
      if (identity_basis) {
        integral = is_integer_matrix(lift);
      } else if (basis_inv) {
        integral = is_integer_matrix(*basis_inv * lift * ambient.basis_matrix());
      } else {
        integral = is_integral_isometry(ambient, lift);
      }
      if (!integral) break;
      std::string key = matrix_to_string(mat3);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) break;
      seen.push_back(key);
      Generator gen;
      gen.mat3 = mat3;
      gen.lift = lift;
      gen.involution = true;
      std::ostringstream os;
      os << "reflection r=" << vec_to_string(r) << " <r,r>=" << rat_to_string(nn);
      gen.provenance = os.str();
      out.push_back(std::move(gen));
    } while (false);
    if (static_cast<int>(out.size()) >= max_generators) break;
    int i = 2;
    while (i >= 0 && c[i] == height) { c[i] = -height; --i; }
    if (i < 0) break;
    ++c[i];
  }
  return out;
}

// --- richer harvest -----------------------------------------------------------------

// Integrality of an ambient-space action on the ambient lattice.
namespace {
struct AmbientChecker {
  const Lattice& amb;
  bool identity_basis = false;
  std::optional<QMat> basis_inv;
  explicit AmbientChecker(const Lattice& l) : amb(l) {
    QMat b = l.basis_matrix();
    identity_basis = l.rank() == l.ambient.dim && b == QMat::identity(l.ambient.dim);
    if (!identity_basis && l.rank() == l.ambient.dim) basis_inv = inverse(b);
  }
  bool integral(const QMat& lift) const {
    if (identity_basis) return is_integer_matrix(lift);
    if (basis_inv) return is_integer_matrix(*basis_inv * lift * amb.basis_matrix());
    return is_integral_isometry(amb, lift);
  }
};
}  // namespace

// Extension of a rank-3 action to the ambient space, identity on the
// orthogonal complement of the embedded subspace.
static QMat lift_block(const QuadraticSpace& v, const QMat& embed, const QMat& mat3) {
  int n = v.dim;
  if (n == 3 && embed == QMat::identity(3)) return mat3;
  Subspace w = Subspace::span(n, embed.col_list());
  Subspace wp = orthogonal_complement(v, w);
  QMat p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) p.at(i, j) = embed.at(i, j);
  for (int j = 0; j + 3 < n; ++j)
    for (int i = 0; i < n; ++i) p.at(i, 3 + j) = wp.basis[j][i];
  QMat block = QMat::identity(n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) block.at(i, j) = mat3.at(i, j);
  return p * block * inverse(p);
}

// --- wall harvest --------------------------------------------------------------------

static Int zinner(const ZMat& g, const ZVec& x, const ZVec& y) {
  Int s = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += x[i] * g.at(i, j) * y[j];
  return s;
}

static Int gcd_vec(const ZVec& v) {
  Int g = 0;
  for (const auto& x : v) mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), x.get_mpz_t());
  return g;
}

// Shortest primitive vector of negative norm within an escalating box.
static std::optional<ZVec> small_negative_vector(const ZMat& g) {
  for (int h : {2, 4, 8, 16, 32}) {
    std::optional<ZVec> best;
    Int best_norm = 0;
    for (int x = 0; x <= h; ++x)
      for (int y = -h; y <= h; ++y)
        for (int z = -h; z <= h; ++z) {
          if (x == 0 && (y < 0 || (y == 0 && z <= 0))) continue;
          ZVec v{Int(x), Int(y), Int(z)};
          if (gcd_vec(v) != 1) continue;
          Int n = zinner(g, v, v);
          if (n >= 0) continue;
          if (!best || -n < -best_norm) {
            best = v;
            best_norm = n;
          }
        }
    if (best) return best;
  }
  return std::nullopt;
}

// Divisors of n in ascending order; gives up (returning what it has) after a
// fixed amount of trial division so a huge discriminant only degrades the
// harvest instead of stalling it.
static std::vector<Int> bounded_divisors(const Int& n) {
  std::vector<Int> small, large;
  Int i = 1;
  long long steps = 0;
  while (i * i <= n && steps < 2'000'000) {
    if (mpz_divisible_p(n.get_mpz_t(), i.get_mpz_t())) {
      small.push_back(i);
      if (i * i != n) large.push_back(n / i);
    }
    ++i;
    ++steps;
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

WallHarvest harvest_walls(const QuadraticSpace& space3) {
  WallHarvest out;
  if (space3.dim != 3 || !is_integer_matrix(space3.gram)) return out;
  ZMat g = zmat_from_qmat(space3.gram);

  auto v0o = small_negative_vector(g);
  if (!v0o) return out;
  const ZVec v0 = *v0o;
  const Int v0n = zinner(g, v0, v0);  // < 0

  // Root norms divide twice the exponent of the discriminant group.
  std::vector<Int> sd = smith_divisors(g);
  if (sd.empty()) return out;
  std::vector<Int> norms;
  for (const Int& d : bounded_divisors(sd.back())) {
    norms.push_back(d);
    norms.push_back(2 * d);
  }
  std::sort(norms.begin(), norms.end());
  norms.erase(std::unique(norms.begin(), norms.end()), norms.end());

  // Lattice slice orthogonal to the center.
  ZVec w(3);
  for (int i = 0; i < 3; ++i) w[i] = v0[0] * g.at(0, i) + v0[1] * g.at(1, i) + v0[2] * g.at(2, i);
  ZMat wrow(1, 3);
  for (int i = 0; i < 3; ++i) wrow.at(0, i) = w[i];
  std::vector<ZVec> ker = integer_kernel(wrow);
  if (ker.size() != 2) return out;
  const ZVec b1 = ker[0], b2 = ker[1];
  const Int A = zinner(g, b1, b1), B = zinner(g, b1, b2), C = zinner(g, b2, b2);

  // u with w.u = gcd(w), for the inhomogeneous slices.
  Int g01, aa, bb;
  mpz_gcdext(g01.get_mpz_t(), aa.get_mpz_t(), bb.get_mpz_t(), w[0].get_mpz_t(), w[1].get_mpz_t());
  Int g0, cc, dd;
  mpz_gcdext(g0.get_mpz_t(), cc.get_mpz_t(), dd.get_mpz_t(), g01.get_mpz_t(), w[2].get_mpz_t());
  ZVec u{cc * aa, cc * bb, dd};
  const Int ub1 = zinner(g, u, b1), ub2 = zinner(g, u, b2), uu = zinner(g, u, u);

  // Mirror distance from the center grows with t^2/n; enumerate in that order.
  struct Level {
    Rat key;
    long t;
    size_t ni;
  };
  std::vector<Level> levels;
  constexpr long kMaxT = 1536;
  const Rat kLevelCap(4096);
  for (size_t ni = 0; ni < norms.size(); ++ni)
    for (long t = 0; t <= kMaxT; ++t) {
      if (t > 0 && !mpz_divisible_p(Int(t).get_mpz_t(), g0.get_mpz_t())) continue;
      Rat key = Rat(Int(t) * Int(t)) / Rat(norms[ni]);
      if (key > kLevelCap) break;
      levels.push_back({key, t, ni});
    }
  std::sort(levels.begin(), levels.end(), [&](const Level& x, const Level& y) {
    if (x.key != y.key) return x.key < y.key;
    if (norms[x.ni] != norms[y.ni]) return norms[x.ni] < norms[y.ni];
    return x.t < y.t;
  });

  // Float frame for the closure test: each mirror excludes a boundary arc; the
  // chamber is compact (or finite-area) exactly when the arcs cover the circle.
  double gf[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) gf[i][j] = Int(g.at(i, j)).get_d();
  auto innerf = [&](const std::array<double, 3>& x, const std::array<double, 3>& y) {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += x[i] * gf[i][j] * y[j];
    return s;
  };
  auto tof = [](const ZVec& v) {
    return std::array<double, 3>{v[0].get_d(), v[1].get_d(), v[2].get_d()};
  };
  std::array<double, 3> n0f = tof(v0), p1f = tof(b1), p2f = tof(b2);
  {
    double s = std::sqrt(-v0n.get_d());
    for (auto& x : n0f) x /= s;
    s = std::sqrt(innerf(p1f, p1f));
    for (auto& x : p1f) x /= s;
    double pr = innerf(p2f, p1f);
    for (int i = 0; i < 3; ++i) p2f[i] -= pr * p1f[i];
    s = std::sqrt(innerf(p2f, p2f));
    for (auto& x : p2f) x /= s;
  }
  std::vector<std::array<double, 2>> arcs;  // (start, end), end - start <= pi
  auto arc_of = [&](const ZVec& r) -> std::optional<std::array<double, 2>> {
    std::array<double, 3> rf = tof(r);
    double c1 = innerf(p1f, rf), c2 = innerf(p2f, rf), c3 = innerf(n0f, rf);
    double radius = std::hypot(c1, c2);
    if (!(radius > std::fabs(c3) + 1e-12 * radius)) return std::nullopt;
    double phi = std::atan2(c2, c1);
    double alpha = std::acos(-c3 / radius);
    return std::array<double, 2>{phi - alpha, phi + alpha};
  };
  auto covered = [&]() {
    if (arcs.size() < 3) return false;
    constexpr double kTol = 1e-7, kTau = 2 * 3.14159265358979323846;
    std::vector<std::array<double, 2>> a;
    for (auto arc : arcs) {
      double s = std::fmod(arc[0], kTau);
      if (s < 0) s += kTau;
      a.push_back({s, s + (arc[1] - arc[0])});
    }
    std::sort(a.begin(), a.end());
    size_t m = a.size();
    for (size_t i = 0; i < m; ++i) a.push_back({a[i][0] + kTau, a[i][1] + kTau});
    double cur = a[0][1], goal = a[0][0] + kTau;
    for (size_t i = 1; i < a.size() && cur < goal - kTol; ++i) {
      if (a[i][0] > cur + kTol) return false;
      cur = std::max(cur, a[i][1]);
    }
    return cur >= goal - kTol;
  };

  // Chamber side for mirrors through the center: fixed generic functionals.
  const ZVec tie1{Int(3), Int(-1), Int(2)}, tie2{Int(1), Int(5), Int(-4)};
  auto orient = [&](ZVec r) -> std::optional<ZVec> {
    Int s = zinner(g, r, v0);
    if (s == 0) s = zinner(g, r, tie1);
    if (s == 0) s = zinner(g, r, tie2);
    if (s == 0) {
      // last resort: lexicographic
      for (const auto& x : r)
        if (x != 0) {
          s = x;
          break;
        }
    }
    if (s == 0) return std::nullopt;
    if (s > 0)
      for (auto& x : r) x = -x;
    return r;
  };

  std::vector<ZVec> accepted;
  long long work = 0;
  constexpr long long kWorkBudget = 4'000'000;
  constexpr int kWallCap = 30;
  for (const Level& lv : levels) {
    if (work > kWorkBudget || static_cast<int>(accepted.size()) >= kWallCap || out.closed) break;
    const Int n = norms[lv.ni];
    const Int t(lv.t);
    // r = r0 + s1 b1 + s2 b2 with <r, v0> = -t, <r, r> = n.
    const Int k0 = -t / g0;
    const Int D = k0 * ub1, E = k0 * ub2, F = k0 * k0 * uu;
    // A s1^2 + 2(B s2 + D) s1 + (C s2^2 + 2 E s2 + F - n) = 0
    const Int qa = B * B - A * C;  // < 0
    const Int qb = 2 * (B * D - A * E);
    const Int qc = D * D - A * F + A * n;
    double da = qa.get_d(), db = qb.get_d(), dc = qc.get_d();
    double disc = db * db - 4 * da * dc;
    if (disc < 0) continue;
    double mid = -db / (2 * da), half = std::sqrt(disc) / (2 * std::fabs(da));
    long lo = static_cast<long>(std::floor(mid - half)) - 2;
    long hi = static_cast<long>(std::ceil(mid + half)) + 2;
    if (hi - lo > 400'000) continue;
    for (long s2 = lo; s2 <= hi; ++s2) {
      ++work;
      Int S2(s2);
      Int disc4 = qa * S2 * S2 + qb * S2 + qc;
      if (disc4 < 0) continue;
      if (mpz_perfect_square_p(disc4.get_mpz_t()) == 0) continue;
      Int root;
      mpz_sqrt(root.get_mpz_t(), disc4.get_mpz_t());
      for (int sgn : {1, -1}) {
        Int num = -(B * S2 + D) + sgn * root;
        if (!mpz_divisible_p(num.get_mpz_t(), A.get_mpz_t())) continue;
        Int s1 = num / A;
        ZVec r(3);
        for (int i = 0; i < 3; ++i) r[i] = k0 * u[i] + s1 * b1[i] + S2 * b2[i];
        if (gcd_vec(r) != 1) continue;
        if (zinner(g, r, r) != n) continue;  // guards the slice algebra
        // crystallographic: the reflection must preserve Z^3
        bool crys = true;
        for (int i = 0; i < 3 && crys; ++i) {
          Int gr = r[0] * g.at(i, 0) + r[1] * g.at(i, 1) + r[2] * g.at(i, 2);
          if (!mpz_divisible_p(Int(2 * gr).get_mpz_t(), n.get_mpz_t())) crys = false;
        }
        if (!crys) continue;
        auto ro = orient(r);
        if (!ro) continue;
        bool ok = true;
        for (const auto& prev : accepted)
          if (zinner(g, *ro, prev) > 0) {
            ok = false;
            break;
          }
        if (!ok) continue;
        if (std::find(accepted.begin(), accepted.end(), *ro) != accepted.end()) continue;
        accepted.push_back(*ro);
        if (auto arc = arc_of(*ro)) arcs.push_back(*arc);
        if (covered()) out.closed = true;
        if (out.closed || static_cast<int>(accepted.size()) >= kWallCap) break;
      }
      if (out.closed || static_cast<int>(accepted.size()) >= kWallCap) break;
    }
  }
  for (const auto& r : accepted) {
    QVec q(3);
    for (int i = 0; i < 3; ++i) q[i] = Rat(r[i]);
    out.roots.push_back(std::move(q));
  }
  return out;
}

std::optional<std::pair<Int, Int>> pell_fundamental(const Int& d, int max_steps,
                                                    size_t bit_cap) {
  if (d <= 0) return std::nullopt;
  Int a0;
  mpz_sqrt(a0.get_mpz_t(), d.get_mpz_t());
  if (a0 * a0 == d) return std::nullopt;
  Int m = 0, den = 1, a = a0;
  Int p_prev = 1, p = a0, q_prev = 0, q = 1;
  auto test = [&d](const Int& pp, const Int& qq) -> std::optional<std::pair<Int, Int>> {
    Int val = pp * pp - d * qq * qq;
    if (val == 1) return std::make_pair(pp, qq);
    // negative-Pell boundary: square the unit
    if (val == -1) return std::make_pair(pp * pp + d * qq * qq, Int(2 * pp * qq));
    return std::nullopt;
  };
  for (int k = 0; k < max_steps; ++k) {
    m = den * a - m;
    den = (d - m * m) / den;
    a = (a0 + m) / den;
    // den returns to 1 exactly at period boundaries, where the solution sits
    // on an adjacent convergent; away from them the test is skipped.
    if (den == 1) {
      if (auto hit = test(p, q)) return hit;
      if (auto hit = test(p_prev, q_prev)) return hit;
    }
    if (mpz_sizeinbase(p.get_mpz_t(), 2) > bit_cap) return std::nullopt;
    Int pn = a * p + p_prev, qn = a * q + q_prev;
    p_prev = p;
    p = pn;
    q_prev = q;
    q = qn;
    if (den == 1) {
      if (auto hit = test(p, q)) return hit;
    }
  }
  return std::nullopt;
}

// One automorph generator for the sublattice orthogonal to the positive
// vector axis, or nothing when that block is definite, square-discriminant,
// or never integral within power_cap.
struct AutomorphCaps {
  int pell_steps = 3000;
  size_t pell_bits = 4096;
  size_t power_bits = 40000;
};
static std::optional<Generator> automorph_for_axis(const QuadraticSpace& space3,
                                                   const Lattice& ambient,
                                                   const QMat& embed_to_ambient,
                                                   const AmbientChecker& check, const QVec& axis,
                                                   int power_cap, const AutomorphCaps& caps = {},
                                                   const char* tag = "binary automorph") {
  Lattice lat3(space3, QMat::identity(3).col_list());
  Subspace perp = orthogonal_complement(space3, Subspace::span(3, {axis}));
  if (perp.rank() != 2) return std::nullopt;
  Lattice b = saturate(lat3, perp);
  if (b.rank() != 2) return std::nullopt;
  QMat gb = b.gram_on_basis();
  const Rat &ga = gb.at(0, 0), &gh = gb.at(0, 1), &gc = gb.at(1, 1);
  if (ga.get_den() != 1 || gh.get_den() != 1 || gc.get_den() != 1) return std::nullopt;
  Int delta = gh.get_num() * gh.get_num() - ga.get_num() * gc.get_num();
  auto pell = pell_fundamental(delta, caps.pell_steps, caps.pell_bits);
  if (!pell) return std::nullopt;
  QMat m2(2, 2);
  m2.at(0, 0) = Rat(pell->first) - gh * Rat(pell->second);
  m2.at(0, 1) = -gc * Rat(pell->second);
  m2.at(1, 0) = ga * Rat(pell->second);
  m2.at(1, 1) = Rat(pell->first) + gh * Rat(pell->second);
  if (!(transpose(m2) * gb * m2 == gb))
    throw std::logic_error("binary automorph does not preserve the block form");
  QMat p3 = QMat::from_cols({primitive_vector(axis), b.basis[0], b.basis[1]});
  QMat p3inv = inverse(p3);
  QMat m2k = m2;
  for (int k = 1; k <= power_cap; ++k) {
    if (mpz_sizeinbase(m2k.at(1, 0).get_num().get_mpz_t(), 2) > caps.power_bits) break;
    QMat diag = QMat::identity(3);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) diag.at(1 + i, 1 + j) = m2k.at(i, j);
    QMat t3 = p3 * diag * p3inv;
    if (is_integer_matrix(t3)) {
      QMat lift = lift_block(ambient.ambient, embed_to_ambient, t3);
      if (check.integral(lift)) {
        Generator gen;
        gen.mat3 = t3;
        gen.lift = lift;
        gen.involution = false;
        std::ostringstream os;
        os << tag << " axis=" << vec_to_string(primitive_vector(axis))
           << " delta=" << delta.get_str() << " power=" << k;
        gen.provenance = os.str();
        return gen;
      }
    }
    m2k = m2k * m2;
  }
  return std::nullopt;
}

std::vector<Generator> harvest_automorphs(const QuadraticSpace& space3, const Lattice& ambient,
                                          const QMat& embed_to_ambient, const QVec& l3,
                                          int power_cap) {
  // Translations along the duals of several small positive lattice vectors;
  // distinct axes are what pushes the group out of the elementary range. Keep
  // the candidates with the smallest entries so downstream exact word
  // products stay affordable.
  constexpr int kAxisHeight = 3;
  constexpr int kMaxAutomorphs = 6;
  AmbientChecker check(ambient);
  std::set<std::string> keys;
  std::set<std::string> seen_axes;
  std::vector<std::pair<size_t, Generator>> found;  // (entry bits, generator)
  auto try_axis = [&](const QVec& axis) {
    if (!(norm2(space3, axis) > 0)) return;
    std::string ak = vec_to_string(primitive_vector(axis));
    if (!seen_axes.insert(ak).second) return;
    auto gen = automorph_for_axis(space3, ambient, embed_to_ambient, check, axis, power_cap);
    if (!gen || !keys.insert(matrix_to_string(gen->mat3)).second) return;
    size_t bits = 0;
    for (const auto& x : gen->mat3.a)
      bits = std::max(bits, mpz_sizeinbase(x.get_num().get_mpz_t(), 2));
    found.emplace_back(bits, std::move(*gen));
  };
  if (norm2(space3, l3) > 0) try_axis(l3);
  for (int x = 0; x <= kAxisHeight; ++x)
    for (int y = -kAxisHeight; y <= kAxisHeight; ++y)
      for (int z = -kAxisHeight; z <= kAxisHeight; ++z) {
        // one representative per +/- pair
        if (x == 0 && (y < 0 || (y == 0 && z < 0))) continue;
        Int g = 0;
        for (int c : {x, y, z}) mpz_gcd_ui(g.get_mpz_t(), g.get_mpz_t(), std::abs(c));
        if (g != 1) continue;
        try_axis({Rat(x), Rat(y), Rat(z)});
      }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Generator> out;
  for (auto& [bits, gen] : found) {
    out.push_back(std::move(gen));
    if (static_cast<int>(out.size()) >= kMaxAutomorphs) break;
  }
  return out;
}

// x -> x + k<x,w>v - k<x,v>w - (k^2 q(w)/2) <x,v>v for isotropic v and w with
// <v,w> = 0: a unipotent isometry fixing the boundary ray of v. Equals the
// k-th power of the k=1 map, so raising k doubles as integrality escalation.
static QMat transvection_matrix(const QuadraticSpace& s, const QVec& v, const QVec& w, long k) {
  QVec gv = s.gram * v, gw = s.gram * w;
  Rat qw = inner(s, w, w);
  Rat kk(k);
  QMat e = QMat::identity(3);
  for (int j = 0; j < 3; ++j) {
    const Rat &xv = gv[j], &xw = gw[j];
    for (int i = 0; i < 3; ++i)
      e.at(i, j) += kk * xw * v[i] - kk * xv * w[i] - kk * kk * (qw / 2) * xv * v[i];
  }
  return e;
}

std::vector<Generator> harvest_plane_stabilizer(const QuadraticSpace& space3,
                                                const Lattice& ambient,
                                                const QMat& embed_to_ambient,
                                                const QVec& plane_normal, int power_cap) {
  std::vector<Generator> out;
  if (!(norm2(space3, plane_normal) > 0)) return out;
  AmbientChecker check(ambient);
  AutomorphCaps caps;
  caps.pell_steps = 400000;
  caps.pell_bits = size_t{1} << 20;
  caps.power_bits = size_t{1} << 22;
  if (auto gen = automorph_for_axis(space3, ambient, embed_to_ambient, check, plane_normal,
                                    std::max(power_cap, 64), caps, "plane automorph"))
    out.push_back(std::move(*gen));

  // Square discriminant: no unit automorph, but the plane then carries two
  // rational isotropic rays and unipotent transvections fix them.
  Lattice lat3(space3, QMat::identity(3).col_list());
  Subspace perp = orthogonal_complement(space3, Subspace::span(3, {plane_normal}));
  if (perp.rank() != 2) return out;
  Lattice b = saturate(lat3, perp);
  if (b.rank() != 2) return out;
  QMat gb = b.gram_on_basis();
  const Rat &ga = gb.at(0, 0), &gh = gb.at(0, 1), &gc = gb.at(1, 1);
  if (ga.get_den() != 1 || gh.get_den() != 1 || gc.get_den() != 1) return out;
  Int delta = gh.get_num() * gh.get_num() - ga.get_num() * gc.get_num();
  if (delta <= 0) return out;
  Int root;
  mpz_sqrt(root.get_mpz_t(), delta.get_mpz_t());
  if (root * root != delta) return out;
  auto comb = [&](const Rat& y, const Rat& z) {
    QVec r(3, Rat(0));
    for (int i = 0; i < 3; ++i) r[i] = y * b.basis[0][i] + z * b.basis[1][i];
    return primitive_vector(r);
  };
  std::vector<QVec> rays;
  if (ga != 0) {
    rays.push_back(comb(Rat(-gh.get_num() + root), ga));
    rays.push_back(comb(Rat(-gh.get_num() - root), ga));
  } else {
    rays.push_back(comb(Rat(1), Rat(0)));
    if (gh != 0) rays.push_back(comb(-gc, Rat(2) * gh));
  }
  for (const QVec& v : rays) {
    if (inner(space3, v, v) != 0) continue;
    Lattice vp = saturate(lat3, orthogonal_complement(space3, Subspace::span(3, {v})));
    if (vp.rank() != 2) continue;
    bool added = false;
    for (const QVec& w : vp.basis) {
      if (added) break;
      if (Subspace::span(3, {v, w}).rank() != 2) continue;  // w parallel to v
      for (long k = 1; k <= 8 && !added; ++k) {
        QMat e = transvection_matrix(space3, v, w, k);
        if (e == QMat::identity(3)) continue;
        if (!is_integer_matrix(e)) continue;
        if (!(transpose(e) * space3.gram * e == space3.gram))
          throw std::logic_error("transvection does not preserve the form");
        QMat lift = lift_block(ambient.ambient, embed_to_ambient, e);
        if (!check.integral(lift)) continue;
        Generator gen;
        gen.mat3 = e;
        gen.lift = std::move(lift);
        gen.involution = false;
        std::ostringstream os;
        os << "plane transvection ray=" << vec_to_string(v) << " k=" << k;
        gen.provenance = os.str();
        out.push_back(std::move(gen));
        added = true;
      }
    }
  }
  return out;
}

std::vector<Generator> harvest_assembled(const QuadraticSpace& space3, const Lattice& ambient,
                                         const QMat& embed_to_ambient, int height, int max_out,
                                         std::set<std::string>& seen) {
  std::vector<Generator> out;
  if (max_out <= 0) return out;
  const QMat& g = space3.gram;
  long long gi[3][3];
  static const Int kEntryCap = Int(1) << 40;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Rat& x = g.at(i, j);
      if (x.get_den() != 1) return out;
      Int n = x.get_num();
      if (n > kEntryCap || n < -kEntryCap) return out;
      gi[i][j] = n.get_si();
    }
  auto ip = [&](const std::array<long long, 3>& x, const std::array<long long, 3>& y) {
    long long s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += x[i] * gi[i][j] * y[j];
    return s;
  };
  AmbientChecker check(ambient);
  constexpr int kBucketCap = 6000;
  std::array<std::vector<std::array<long long, 3>>, 3> buckets;
  for (long long x = -height; x <= height; ++x)
    for (long long y = -height; y <= height; ++y)
      for (long long z = -height; z <= height; ++z) {
        std::array<long long, 3> c{x, y, z};
        long long q = ip(c, c);
        for (int j = 0; j < 3; ++j)
          if (q == gi[j][j] && static_cast<int>(buckets[j].size()) < kBucketCap)
            buckets[j].push_back(c);
      }
  long long budget = 3'000'000;
  for (const auto& c0 : buckets[0]) {
    for (const auto& c1 : buckets[1]) {
      if (--budget < 0) return out;
      if (ip(c0, c1) != gi[0][1]) continue;
      for (const auto& c2 : buckets[2]) {
        if (--budget < 0) return out;
        if (ip(c0, c2) != gi[0][2] || ip(c1, c2) != gi[1][2]) continue;
        QMat m(3, 3);
        for (int i = 0; i < 3; ++i) {
          m.at(i, 0) = Rat(static_cast<long>(c0[i]));
          m.at(i, 1) = Rat(static_cast<long>(c1[i]));
          m.at(i, 2) = Rat(static_cast<long>(c2[i]));
        }
        if (m == QMat::identity(3) || m == scale(QMat::identity(3), Rat(-1))) continue;
        if (!(transpose(m) * g * m == g)) continue;
        std::string key = matrix_to_string(m);
        if (seen.count(key)) continue;
        QMat lift = lift_block(ambient.ambient, embed_to_ambient, m);
        if (!check.integral(lift)) continue;
        seen.insert(key);
        Generator gen;
        gen.mat3 = m;
        gen.lift = std::move(lift);
        gen.involution = m * m == QMat::identity(3);
        std::ostringstream os;
        os << "assembled height=" << height;
        gen.provenance = os.str();
        out.push_back(std::move(gen));
        if (static_cast<int>(out.size()) >= max_out) return out;
      }
    }
  }
  return out;
}

std::vector<Generator> harvest_generators(const QuadraticSpace& space3, const Lattice& ambient,
                                          const QMat& embed_to_ambient, const QVec& l3,
                                          const DescentConfig& cfg, const QVec* target_normal,
                                          nlohmann::ordered_json* stats) {
  std::vector<Generator> gens;
  std::set<std::string> keys;
  auto add = [&](Generator&& g) {
    if (keys.insert(matrix_to_string(g.mat3)).second) gens.push_back(std::move(g));
  };

  // Stabilizer of the target geodesic first: its fixed boundary points sit at
  // the ends of that geodesic, so it anchors the search no matter how thin
  // the rest of the harvest turns out.
  size_t n_stab = 0;
  if (target_normal) {
    for (auto& g : harvest_plane_stabilizer(space3, ambient, embed_to_ambient, *target_normal,
                                            cfg.automorph_power_cap)) {
      size_t before = gens.size();
      add(std::move(g));
      n_stab += gens.size() - before;
    }
  }

  // Mirror walls: when they close around the center they already generate a
  // finite-covolume group.
  WallHarvest walls = harvest_walls(space3);
  AmbientChecker check(ambient);
  std::vector<QMat> wall_mats;
  size_t n_wall = 0;
  for (const auto& r : walls.roots) {
    QMat mat3 = reflection_matrix(space3, r);
    if (!is_integer_matrix(mat3)) continue;
    wall_mats.push_back(mat3);
    QMat lift = lift_block(ambient.ambient, embed_to_ambient, mat3);
    if (!check.integral(lift)) continue;
    Generator gen;
    gen.mat3 = mat3;
    gen.lift = std::move(lift);
    gen.involution = true;
    std::ostringstream os;
    os << "wall r=" << vec_to_string(r) << " <r,r>=" << rat_to_string(norm2(space3, r));
    gen.provenance = os.str();
    add(std::move(gen));
    ++n_wall;
  }

  // A wall that does not extend integrally to the ambient lattice can still
  // contribute through short products that act trivially on the glue.
  size_t n_prod = 0;
  if (wall_mats.size() >= 2 && n_wall < wall_mats.size()) {
    std::set<std::string> seenw;
    std::deque<std::pair<QMat, int>> queue;
    QMat id = QMat::identity(3);
    seenw.insert(matrix_to_string(id));
    queue.push_back({id, 0});
    while (!queue.empty() && seenw.size() < 3000 && n_prod < 16) {
      auto [m, len] = queue.front();
      queue.pop_front();
      if (len >= 4) continue;
      for (const auto& w : wall_mats) {
        QMat next = w * m;
        std::string key = matrix_to_string(next);
        if (!seenw.insert(key).second) continue;
        if (len + 1 >= 2) {
          QMat lift = lift_block(ambient.ambient, embed_to_ambient, next);
          if (check.integral(lift)) {
            Generator gen;
            gen.mat3 = next;
            gen.lift = std::move(lift);
            gen.involution = next * next == QMat::identity(3);
            gen.provenance = "wall product len=" + std::to_string(len + 1);
            add(std::move(gen));
            ++n_prod;
            if (n_prod >= 16) break;
          }
        }
        queue.push_back({std::move(next), len + 1});
      }
    }
  }

  // Boxed reflections keep their role as the cheap baseline and as the
  // fallback for non-integral Gram matrices.
  int height = cfg.reflection_height;
  size_t n_refl = 0;
  for (int attempt = 0; attempt < 3; ++attempt) {
    n_refl = 0;
    for (auto& g :
         harvest_reflections(space3, ambient, embed_to_ambient, height, cfg.max_generators)) {
      size_t before = gens.size();
      add(std::move(g));
      n_refl += gens.size() - before;
    }
    if (static_cast<int>(gens.size()) >= cfg.min_generators) break;
    height += 4;
  }

  size_t n_auto = 0, n_asm = 0;
  bool rich = walls.closed && static_cast<int>(gens.size()) >= 8;
  if (!rich) {
    for (auto& g :
         harvest_automorphs(space3, ambient, embed_to_ambient, l3, cfg.automorph_power_cap)) {
      size_t before = gens.size();
      add(std::move(g));
      n_auto += gens.size() - before;
    }
    if (static_cast<int>(gens.size()) < cfg.max_generators) {
      int room = cfg.max_generators - static_cast<int>(gens.size());
      auto assembled = harvest_assembled(space3, ambient, embed_to_ambient, cfg.assembly_height,
                                         std::min(room, 24), keys);
      n_asm = assembled.size();
      for (auto& g : assembled) gens.push_back(std::move(g));
    }
  }
  if (stats)
    *stats = {{"generators", gens.size()}, {"stabilizer", n_stab},  {"walls", n_wall},
              {"wall_products", n_prod},   {"closed", walls.closed}, {"reflections", n_refl},
              {"automorphs", n_auto},      {"assembled", n_asm},     {"height", height}};
  return gens;
}

// --- descent ---------------------------------------------------------------------------

static QVec coords_on(const std::vector<QVec>& basis, const QVec& v) {
  auto sol = solve(QMat::from_cols(basis), v);
  if (!sol) throw std::logic_error("vector not in claimed span");
  return *sol;
}

HyperbolicProblem descend(const QuadraticSpace& v, const Lattice& l, const QVec& lvec,
                          const Subspace& target, const DescentConfig& cfg) {
  if (l.rank() != v.dim) throw std::invalid_argument("lattice must have full rank");
  if (!(norm2(v, lvec) > 0)) throw std::invalid_argument("descent needs <l,l> > 0");
  if (!l.contains(lvec)) throw std::invalid_argument("l must be a lattice vector");
  {
    Signature sig = signature_on(v, target);
    if (!(sig == Signature{2, 0, 0}))
      throw std::invalid_argument("target must be positive definite of rank 2, got " +
                                  sig.to_string());
    bool orth = true;
    for (const auto& b : target.basis)
      if (inner(v, b, lvec) != 0) { orth = false; break; }
    if (orth) throw std::invalid_argument("target orthogonal to l needs no search");
  }

  auto ctx = std::make_shared<DescentContext>();
  ctx->V = v;
  ctx->L = l;
  ctx->l = primitive_vector(lvec);
  ctx->target = target;

  // Envelope.
  ctx->U0 = build_U0(v, l, target, ctx->l);
  ctx->embed_U = QMat::from_cols(ctx->U0.basis);
  ctx->U = restrict_form(v, ctx->U0);
  ctx->l_U = coords_on(ctx->U0.basis, ctx->l);
  {
    std::vector<QVec> cb;
    for (const auto& b : target.basis) cb.push_back(coords_on(ctx->U0.basis, b));
    ctx->C_U = Subspace::span(4, cb);
  }
  ctx->trace.push_back({"envelope",
                        {{"dim", 4}, {"signature", signature(ctx->U).to_string()}}});

  // Saturated rank-4 lattice in U coordinates.
  Lattice sat = saturate(l, ctx->U0);
  if (sat.rank() != 4) throw std::logic_error("saturation of the envelope is not rank 4");
  {
    std::vector<QVec> coords;
    for (const auto& b : sat.basis) coords.push_back(coords_on(ctx->U0.basis, b));
    ctx->M_U = Lattice(ctx->U, coords);
  }
  ctx->trace.push_back({"saturate", {{"rank", ctx->M_U.rank()}}});

  // Dual plane and reduced space.
  ctx->G0_U = dualize(ctx->U, ctx->C_U, Signature{1, 1, 0});
  ctx->W_U = build_W(ctx->U, ctx->l_U, ctx->G0_U);
  SplitLattice split = split_lattice(ctx->M_U, ctx->W_U);
  if (split.in_w.rank() != 3 || split.in_perp.rank() != 1)
    throw std::logic_error("orthogonal split has unexpected ranks");
  ctx->split_index = split.index;
  ctx->trace.push_back({"split",
                        {{"rank_w", split.in_w.rank()},
                         {"rank_perp", split.in_perp.rank()},
                         {"index", split.index.get_str()}}});

  HyperbolicProblem prob;
  prob.ctx = ctx;
  prob.space3 = QuadraticSpace(3, split.in_w.gram_on_basis());
  {
    std::vector<QVec> id;
    QMat e = QMat::identity(3);
    for (int i = 0; i < 3; ++i) id.push_back(e.row(i));
    prob.lattice3 = Lattice(prob.space3, id);
  }
  ctx->embed_3U = QMat::from_cols(split.in_w.basis);
  ctx->embed_3V = ctx->embed_U * ctx->embed_3U;
  prob.l3 = coords_on(split.in_w.basis, ctx->l_U);
  for (const auto& x : prob.l3)
    if (x.get_den() != 1) throw std::logic_error("l is not integral in the reduced lattice");
  prob.source = geodesic_from_normal(prob.space3, prob.l3);
  {
    std::vector<QVec> tb;
    for (const auto& b : ctx->G0_U.basis) tb.push_back(coords_on(split.in_w.basis, b));
    prob.target = geodesic_from_plane(prob.space3, Subspace::span(3, tb));
  }
  ctx->trace.push_back({"restrict",
                        {{"signature", signature(prob.space3).to_string()},
                         {"gram", matrix_to_string(prob.space3.gram)},
                         {"l3", vec_to_string(prob.l3)}}});

  // Generators.
  nlohmann::ordered_json hstats;
  prob.generators = harvest_generators(prob.space3, l, ctx->embed_3V, prob.l3, cfg,
                                       &prob.target.normal, &hstats);
  if (static_cast<int>(prob.generators.size()) < cfg.min_generators)
    throw std::runtime_error(
        "too few integral isometries in the reduced lattice; "
        "retry with a larger reflection height or a different rationalization");
  ctx->trace.push_back({"harvest", hstats});
  return prob;
}

}  // namespace denseorbit
