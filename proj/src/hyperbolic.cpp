#include "hyperbolic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace denseorbit {

double wrap_angle(double t) {
  double w = std::fmod(t, 2 * kPi);
  if (w < 0) w += 2 * kPi;
  if (w >= 2 * kPi) w = 0;
  return w;
}

double angle_distance(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return d > kPi ? 2 * kPi - d : d;
}

// --- KleinFrame ---------------------------------------------------------------

static std::array<double, 9> mat3_mul(const std::array<double, 9>& x,
                                      const std::array<double, 9>& y) {
  std::array<double, 9> z{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += x[3 * i + k] * y[3 * k + j];
      z[3 * i + j] = acc;
    }
  return z;
}

static std::array<double, 3> mat3_apply(const std::array<double, 9>& m,
                                        const std::array<double, 3>& v) {
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i)
    out[i] = m[3 * i] * v[0] + m[3 * i + 1] * v[1] + m[3 * i + 2] * v[2];
  return out;
}

static std::array<double, 9> qmat_to_arr3(const QMat& m) {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[3 * i + j] = rat_to_double(m.at(i, j));
  return out;
}

KleinFrame::KleinFrame(QuadraticSpace s) : space_(std::move(s)) {
  if (space_.dim != 3) throw std::invalid_argument("disc model needs a 3-dimensional space");
  Diagonalization d = diagonalize(space_);
  int plus = 0, minus = 0;
  for (const auto& x : d.diag) {
    if (x > 0) ++plus;
    else if (x < 0) ++minus;
  }
  if (plus != 2 || minus != 1)
    throw std::invalid_argument("disc model needs signature (2,1), got " +
                                signature(space_).to_string());
  S_ = d.transform;
  s3_ = S_.col(2);
  double sa = std::sqrt(rat_to_double(d.diag[0]));
  double sb = std::sqrt(rat_to_double(d.diag[1]));
  double sc = std::sqrt(-rat_to_double(d.diag[2]));
  std::array<double, 9> sf = qmat_to_arr3(S_);
  std::array<double, 9> sfinv = qmat_to_arr3(inverse(S_));
  std::array<double, 9> dinv{1 / sa, 0, 0, 0, 1 / sb, 0, 0, 0, 1 / sc};
  std::array<double, 9> dscale{sa, 0, 0, 0, sb, 0, 0, 0, sc};
  E_ = mat3_mul(sf, dinv);
  Einv_ = mat3_mul(dscale, sfinv);
}

std::array<double, 3> KleinFrame::to_frame(const QVec& v) const {
  return to_frame(std::array<double, 3>{rat_to_double(v[0]), rat_to_double(v[1]),
                                        rat_to_double(v[2])});
}

std::array<double, 3> KleinFrame::to_frame(const std::array<double, 3>& v_space) const {
  return mat3_apply(Einv_, v_space);
}

std::array<double, 3> KleinFrame::from_frame(const std::array<double, 3>& u) const {
  return mat3_apply(E_, u);
}

std::array<double, 9> KleinFrame::frame_action(const QMat& m_space) const {
  // The action on rays is projective, so a uniform rescale is harmless; apply
  // one when entries of long word products would exceed double range.
  Rat mx(0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Rat a = abs(m_space.at(i, j));
      if (a > mx) mx = a;
    }
  std::array<double, 9> arr{};
  bool huge = mx > Rat(Int(1) << 320);
  if (mx != 0)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        arr[3 * i + j] =
            huge ? rat_to_double(Rat(m_space.at(i, j) / mx)) : rat_to_double(m_space.at(i, j));
  return frame_action(arr);
}

std::array<double, 9> KleinFrame::frame_action(const std::array<double, 9>& m_space) const {
  return mat3_mul(Einv_, mat3_mul(m_space, E_));
}

// Exact rescale before the double conversion: entries of long exact words can
// overflow or flush to zero in plain rat_to_double and fake a degenerate ray.
static std::array<double, 3> scaled_to_double3(const QVec& v) {
  Rat m(0);
  for (const auto& x : v) {
    Rat a = abs(x);
    if (a > m) m = a;
  }
  if (m == 0) return {0.0, 0.0, 0.0};
  return {rat_to_double(Rat(v[0] / m)), rat_to_double(Rat(v[1] / m)),
          rat_to_double(Rat(v[2] / m))};
}

BoundaryPoint KleinFrame::boundary_point(const QVec& isotropic) const {
  if (norm2(space_, isotropic) != 0)
    throw std::invalid_argument("boundary point needs an isotropic vector");
  if (is_zero_vec(isotropic)) throw std::invalid_argument("boundary point of zero vector");
  BoundaryPoint p = boundary_point_from_space(scaled_to_double3(isotropic));
  p.exact = primitive_vector(isotropic);
  return p;
}

BoundaryPoint KleinFrame::boundary_point_from_space(const std::array<double, 3>& v) const {
  return boundary_point_from_frame(to_frame(v));
}

BoundaryPoint KleinFrame::boundary_point_from_frame(std::array<double, 3> ray) const {
  if (ray[2] < 0)
    for (auto& x : ray) x = -x;
  BoundaryPoint p;
  p.theta = wrap_angle(std::atan2(ray[1], ray[0]));
  double r = std::hypot(ray[0], ray[1]);
  if (r == 0 || ray[2] == 0) throw std::invalid_argument("degenerate boundary ray");
  p.ray = {ray[0] / r, ray[1] / r, 1.0};
  return p;
}

BoundaryPoint KleinFrame::boundary_point_at(double theta) {
  BoundaryPoint p;
  p.theta = wrap_angle(theta);
  p.ray = {std::cos(p.theta), std::sin(p.theta), 1.0};
  return p;
}

DiscPoint KleinFrame::disc_point(const QVec& negative) const {
  if (!(norm2(space_, negative) < 0))
    throw std::invalid_argument("disc point needs a negative vector");
  std::array<double, 3> u = to_frame(scaled_to_double3(negative));
  DiscPoint p = disc_point_from_frame(u);
  p.exact = primitive_vector(negative);
  return p;
}

DiscPoint KleinFrame::disc_point_from_frame(const std::array<double, 3>& u) const {
  if (u[2] == 0) throw std::invalid_argument("degenerate disc point");
  DiscPoint p;
  p.x = u[0] / u[2];
  p.y = u[1] / u[2];
  return p;
}

// --- geodesics ----------------------------------------------------------------

Geodesic geodesic_from_plane(const QuadraticSpace& s, const Subspace& plane) {
  if (plane.rank() != 2) throw std::invalid_argument("geodesic plane must have rank 2");
  Signature sig = signature_on(s, plane);
  if (!(sig == Signature{1, 1, 0}))
    throw std::invalid_argument("geodesic plane must have signature (1,1), got " +
                                sig.to_string());
  Subspace perp = orthogonal_complement(s, plane);
  if (perp.rank() != 1) throw std::logic_error("geodesic normal not a line");
  Geodesic g;
  g.plane = plane;
  g.normal = primitive_vector(perp.basis[0]);
  if (!(norm2(s, g.normal) > 0)) throw std::logic_error("geodesic normal not positive");
  return g;
}

Geodesic geodesic_from_normal(const QuadraticSpace& s, const QVec& n) {
  if (!(norm2(s, n) > 0)) throw std::invalid_argument("geodesic normal must be positive");
  Subspace plane = orthogonal_complement(s, Subspace::span(s.dim, {n}));
  Geodesic g;
  g.plane = plane;
  g.normal = primitive_vector(n);
  return g;
}

Geodesic transform_geodesic(const QuadraticSpace& s, const Geodesic& g, const QMat& m) {
  std::vector<QVec> imgs;
  for (const auto& b : g.plane.basis) imgs.push_back(m * b);
  Geodesic out;
  out.plane = Subspace::span(s.dim, imgs);
  out.normal = primitive_vector(m * g.normal);
  return out;
}

std::array<BoundaryPoint, 2> endpoints(const KleinFrame& f, const Geodesic& g) {
  const QuadraticSpace& s = f.space();
  const QVec& p = g.plane.basis[0];
  const QVec& q = g.plane.basis[1];
  Rat a = norm2(s, q), b = inner(s, p, q), c = norm2(s, p);
  std::vector<BoundaryPoint> pts;
  auto push_exact = [&](const QVec& v) { pts.push_back(f.boundary_point(v)); };
  if (a == 0) {
    // q itself is isotropic; the second root comes from the linear part.
    push_exact(q);
    if (b == 0) throw std::invalid_argument("degenerate geodesic plane");
    Rat t = -c / (2 * b);
    push_exact(add_vec(p, scale_vec(q, t)));
  } else {
    Rat disc = b * b - a * c;
    if (disc <= 0) throw std::invalid_argument("plane does not meet the absolute");
    if (auto root = exact_sqrt(disc)) {
      Rat t1 = (-b + *root) / a, t2 = (-b - *root) / a;
      push_exact(add_vec(p, scale_vec(q, t1)));
      push_exact(add_vec(p, scale_vec(q, t2)));
    } else {
      double ad = rat_to_double(a), bd = rat_to_double(b), cd = rat_to_double(c);
      double rd = std::sqrt(bd * bd - ad * cd);
      for (double t : {(-bd + rd) / ad, (-bd - rd) / ad}) {
        std::array<double, 3> v;
        for (int i = 0; i < 3; ++i) v[i] = rat_to_double(p[i]) + t * rat_to_double(q[i]);
        pts.push_back(f.boundary_point_from_space(v));
      }
    }
  }
  if (pts[0].theta > pts[1].theta) std::swap(pts[0], pts[1]);
  return {pts[0], pts[1]};
}

bool geodesics_orthogonal(const QuadraticSpace& s, const Geodesic& a, const Geodesic& b) {
  return inner(s, a.normal, b.normal) == 0;
}

BoundaryPoint reflect_boundary_point(const KleinFrame& f, const BoundaryPoint& v,
                                     const Geodesic& g) {
  const QuadraticSpace& s = f.space();
  if (v.exact) {
    if (inner(s, *v.exact, g.normal) == 0)
      throw std::domain_error("boundary point lies on the geodesic");
    return f.boundary_point(reflect(s, g.normal, *v.exact));
  }
  std::array<double, 3> vs = f.from_frame(v.ray);
  double nn = 0, vn = 0, scale = 0;
  std::array<double, 3> nd{rat_to_double(g.normal[0]), rat_to_double(g.normal[1]),
                           rat_to_double(g.normal[2])};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double gij = rat_to_double(s.gram.at(i, j));
      nn += nd[i] * gij * nd[j];
      vn += vs[i] * gij * nd[j];
      scale += std::fabs(gij);
    }
  if (std::fabs(vn) < 1e-12 * scale)
    throw std::domain_error("boundary point lies on the geodesic");
  std::array<double, 3> w;
  for (int i = 0; i < 3; ++i) w[i] = vs[i] - 2 * vn / nn * nd[i];
  return f.boundary_point_from_space(w);
}

// --- classification -----------------------------------------------------------

std::string to_string(IsometryClass c) {
  switch (c) {
    case IsometryClass::Identity: return "identity";
    case IsometryClass::Elliptic: return "elliptic";
    case IsometryClass::Parabolic: return "parabolic";
    case IsometryClass::Hyperbolic: return "hyperbolic";
    case IsometryClass::OrientationReversing: return "orientation-reversing";
  }
  return "?";
}

static std::array<double, 9> adjugate3(const std::array<double, 9>& m) {
  return {m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
          m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
          m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
}

// Dominant-eigenvector ray by normalized power iteration, best of a few seeds
// judged by closeness to the light cone in frame coordinates.
static std::array<double, 3> dominant_ray(const std::array<double, 9>& m) {
  static const std::array<std::array<double, 3>, 3> seeds{
      {{0.31, 0.41, 1.0}, {-0.77, 0.22, 1.0}, {0.05, -0.93, 1.0}}};
  std::array<double, 3> best{0, 0, 0};
  double best_q = std::numeric_limits<double>::infinity();
  for (const auto& s : seeds) {
    std::array<double, 3> r = s;
    bool dead = false;
    for (int k = 0; k < 48; ++k) {
      r = mat3_apply(m, r);
      double n = std::max({std::fabs(r[0]), std::fabs(r[1]), std::fabs(r[2])});
      if (!(n > 0) || !std::isfinite(n)) {
        dead = true;
        break;
      }
      for (auto& x : r) x /= n;
    }
    if (dead) continue;
    double q = std::fabs(r[0] * r[0] + r[1] * r[1] - r[2] * r[2]);
    if (q < best_q) {
      best_q = q;
      best = r;
    }
  }
  if (!std::isfinite(best_q)) throw std::invalid_argument("degenerate boundary ray");
  return best;
}

// Eigenvector of a 3x3 float matrix for eigenvalue lam, via the largest cross
// product of rows of (m - lam I).
static std::array<double, 3> float_eigenvector(const std::array<double, 9>& m, double lam) {
  std::array<double, 9> a = m;
  a[0] -= lam;
  a[4] -= lam;
  a[8] -= lam;
  std::array<std::array<double, 3>, 3> rows{{{a[0], a[1], a[2]},
                                             {a[3], a[4], a[5]},
                                             {a[6], a[7], a[8]}}};
  auto cross = [](const std::array<double, 3>& x, const std::array<double, 3>& y) {
    return std::array<double, 3>{x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2],
                                 x[0] * y[1] - x[1] * y[0]};
  };
  std::array<double, 3> best{0, 0, 0};
  double best_norm = -1;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      auto c = cross(rows[i], rows[j]);
      double n = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
      if (n > best_norm) {
        best_norm = n;
        best = c;
      }
    }
  return best;
}

static ClassifiedIsometry classify_frame(const KleinFrame& f,
                                         const std::array<double, 9>& h_frame, double det_h,
                                         const std::optional<QMat>& exact_h) {
  // h_frame: sheet-preserving representative in frame coordinates.
  ClassifiedIsometry out;
  out.frame = h_frame;
  out.trace = h_frame[0] + h_frame[4] + h_frame[8];
  const double t = out.trace;

  if (det_h < 0) {
    out.cls = IsometryClass::OrientationReversing;
    return out;
  }

  bool exact_identity = false, exact_parabolic = false, exact_known = false;
  if (exact_h) {
    exact_known = true;
    QMat diff = *exact_h - QMat::identity(3);
    int rk = rank(diff);
    exact_identity = rk == 0;
    // trace test is exact for rational input
    Rat tr = exact_h->at(0, 0) + exact_h->at(1, 1) + exact_h->at(2, 2);
    if (tr == 3 && rk > 0) exact_parabolic = true;
    if (tr > 3) {
      out.cls = IsometryClass::Hyperbolic;
    } else if (exact_identity) {
      out.cls = IsometryClass::Identity;
      return out;
    } else if (exact_parabolic) {
      out.cls = IsometryClass::Parabolic;
    } else {
      out.cls = IsometryClass::Elliptic;
    }
  } else {
    double disc = (t - 1) * (t - 1) - 4;
    if (std::fabs(disc) <= 1e-10) {
      // Double eigenvalue: +1 (trace near 3, parabolic or identity) or -1
      // (trace near -1, half-turn, which is elliptic).
      if (t < 0) {
        out.cls = IsometryClass::Elliptic;
      } else {
        double maxdiff = 0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            maxdiff = std::max(maxdiff,
                               std::fabs(h_frame[3 * i + j] - (i == j ? 1.0 : 0.0)));
        if (maxdiff <= 1e-8) {
          out.cls = IsometryClass::Identity;
          return out;
        }
        out.cls = IsometryClass::Parabolic;
      }
    } else if (disc > 0) {
      out.cls = IsometryClass::Hyperbolic;
    } else {
      out.cls = IsometryClass::Elliptic;
    }
  }

  if (out.cls == IsometryClass::Hyperbolic) {
    // The closed-form eigenvector loses all precision once the trace is big
    // (and the frame matrix may arrive uniformly rescaled); there the spectral
    // gap is enormous, so normalized power iteration is exact enough.
    bool iterate = !std::isfinite(t) || std::fabs(t) > 1e8;
    if (exact_h) {
      double trd = rat_to_double(Rat(exact_h->at(0, 0) + exact_h->at(1, 1) + exact_h->at(2, 2)));
      if (!std::isfinite(trd) || std::fabs(trd) > 1e8) iterate = true;
    }
    if (iterate) {
      out.attractor = f.boundary_point_from_frame(dominant_ray(h_frame));
      // The float adjugate cancels catastrophically at this scale, so prefer
      // the exact inverse whenever it is available.
      if (exact_h)
        out.repeller = f.boundary_point_from_frame(dominant_ray(f.frame_action(inverse(*exact_h))));
      else
        out.repeller = f.boundary_point_from_frame(dominant_ray(adjugate3(h_frame)));
    } else {
      double half = (t - 1) / 2;
      double lam = half + std::sqrt(half * half - 1);
      out.attractor = f.boundary_point_from_frame(float_eigenvector(h_frame, lam));
      out.repeller = f.boundary_point_from_frame(float_eigenvector(h_frame, 1 / lam));
    }
  } else if (out.cls == IsometryClass::Parabolic) {
    if (exact_known) {
      std::vector<QVec> ker = kernel(*exact_h - QMat::identity(3));
      if (ker.size() != 1) throw std::logic_error("parabolic fixed space not a line");
      QVec v = primitive_vector(ker[0]);
      if (norm2(f.space(), v) != 0) throw std::logic_error("parabolic fixed line not isotropic");
      out.attractor = f.boundary_point(v);
    } else {
      out.attractor = f.boundary_point_from_frame(float_eigenvector(h_frame, 1.0));
    }
  } else if (out.cls == IsometryClass::Elliptic) {
    if (exact_known) {
      std::vector<QVec> ker = kernel(*exact_h - QMat::identity(3));
      if (ker.size() != 1) throw std::logic_error("elliptic fixed space not a line");
      QVec v = primitive_vector(ker[0]);
      if (!(norm2(f.space(), v) < 0)) throw std::logic_error("elliptic center not negative");
      out.interior_fixed = f.disc_point(v);
    } else {
      auto u = float_eigenvector(h_frame, 1.0);
      out.interior_fixed = f.disc_point_from_frame(u);
    }
  }
  return out;
}

ClassifiedIsometry classify_isometry(const KleinFrame& f, const QMat& m) {
  if (m.rows != 3 || m.cols != 3) throw std::invalid_argument("classification needs a 3x3 matrix");
  if (!is_isometry(f.space(), m)) throw std::invalid_argument("matrix is not an isometry");
  Rat det = determinant(m);
  QVec ms3 = m * f.negative_basis_vector();
  bool sheet = inner(f.space(), ms3, f.negative_basis_vector()) < 0;
  QMat h = sheet ? m : scale(m, Rat(-1));
  Rat det_h = sheet ? det : -det;  // (-1)^3 * det
  return classify_frame(f, f.frame_action(h), rat_to_double(det_h), h);
}

ClassifiedIsometry classify_isometry(const KleinFrame& f, const std::array<double, 9>& m_space) {
  // Residual check against the Gram matrix.
  double scale = 0, resid = 0;
  const QMat& g = f.space().gram;
  std::array<double, 9> gd = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      gd[3 * i + j] = rat_to_double(g.at(i, j));
      scale = std::max(scale, std::fabs(gd[3 * i + j]));
    }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) acc += m_space[3 * k + i] * gd[3 * k + l] * m_space[3 * l + j];
      resid = std::max(resid, std::fabs(acc - gd[3 * i + j]));
    }
  if (resid > 1e-9 * std::max(1.0, scale))
    throw std::invalid_argument("matrix is not an isometry (residual too large)");

  double det = m_space[0] * (m_space[4] * m_space[8] - m_space[5] * m_space[7]) -
               m_space[1] * (m_space[3] * m_space[8] - m_space[5] * m_space[6]) +
               m_space[2] * (m_space[3] * m_space[7] - m_space[4] * m_space[6]);
  // Sheet test on the negative frame vector.
  const QVec& s3 = f.negative_basis_vector();
  std::array<double, 3> s3d{rat_to_double(s3[0]), rat_to_double(s3[1]), rat_to_double(s3[2])};
  std::array<double, 3> img = mat3_apply(m_space, s3d);
  double ip = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) ip += img[i] * gd[3 * i + j] * s3d[j];
  std::array<double, 9> h = m_space;
  double det_h = det;
  if (ip > 0) {
    for (auto& x : h) x = -x;
    det_h = -det;
  }
  return classify_frame(f, f.frame_action(h), det_h, std::nullopt);
}

// --- power iteration ------------------------------------------------------------

PowerIterateResult power_iterate(const KleinFrame& f, const ClassifiedIsometry& gamma,
                                 const BoundaryPoint& u, int n_max, double tol) {
  if (gamma.cls != IsometryClass::Hyperbolic && gamma.cls != IsometryClass::Parabolic)
    throw std::invalid_argument("power iteration needs a parabolic or hyperbolic element");
  const BoundaryPoint& target = *gamma.attractor;
  if (gamma.cls == IsometryClass::Hyperbolic) {
    const BoundaryPoint& rep = *gamma.repeller;
    bool exact_equal =
        u.exact && rep.exact && proportional(*u.exact, *rep.exact);
    if (exact_equal || boundary_distance(u, rep) < 1e-12)
      throw std::domain_error("start point is the repelling fixed point");
  }
  PowerIterateResult res;
  std::array<double, 3> r = u.ray;
  for (int n = 1; n <= n_max; ++n) {
    r = mat3_apply(gamma.frame, r);
    if (r[2] < 0)
      for (auto& x : r) x = -x;
    if (r[2] != 0)
      for (auto& x : r) x /= r[2];
    double theta = wrap_angle(std::atan2(r[1], r[0]));
    res.thetas.push_back(theta);
    double d = angle_distance(theta, target.theta);
    if (d <= tol) {
      res.converged = true;
      res.n = n;
      res.point = f.boundary_point_at(theta);
      res.point.ray = {r[0], r[1], 1.0};
      res.final_distance = d;
      return res;
    }
  }
  res.converged = false;
  res.n = n_max;
  double theta = res.thetas.empty() ? u.theta : res.thetas.back();
  res.point = f.boundary_point_at(theta);
  res.final_distance = angle_distance(theta, target.theta);
  return res;
}

}  // namespace denseorbit
