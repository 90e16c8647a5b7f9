#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace denseorbit {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

double wrap_angle(double t);                // into [0, 2*pi)
double angle_distance(double a, double b);  // circle distance, in [0, pi]

// Point of the absolute, as a ray on the forward light cone. Frame
// coordinates are normalized so the ray is (cos theta, sin theta, 1).
struct BoundaryPoint {
  double theta = 0;
  std::array<double, 3> ray{1, 0, 1};
  std::optional<QVec> exact;  // isotropic vector in space coordinates, when known
};

// Interior point of the disc model.
struct DiscPoint {
  double x = 0, y = 0;
  std::optional<QVec> exact;  // negative vector in space coordinates, when known
};

// Signature (2,1) space together with an exact diagonalizing basis and its
// float normalization to the standard frame diag(1,1,-1).
class KleinFrame {
 public:
  explicit KleinFrame(QuadraticSpace s);  // throws unless signature is (2,1)

  const QuadraticSpace& space() const { return space_; }
  const QMat& diagonalizer() const { return S_; }
  const QVec& negative_basis_vector() const { return s3_; }

  std::array<double, 3> to_frame(const QVec& v) const;
  std::array<double, 3> to_frame(const std::array<double, 3>& v_space) const;
  std::array<double, 3> from_frame(const std::array<double, 3>& u) const;
  std::array<double, 9> frame_action(const QMat& m_space) const;
  std::array<double, 9> frame_action(const std::array<double, 9>& m_space) const;

  BoundaryPoint boundary_point(const QVec& isotropic) const;  // throws if <v,v> != 0
  BoundaryPoint boundary_point_from_space(const std::array<double, 3>& v) const;
  BoundaryPoint boundary_point_from_frame(std::array<double, 3> ray) const;
  static BoundaryPoint boundary_point_at(double theta);
  DiscPoint disc_point(const QVec& negative) const;  // throws if <v,v> >= 0
  DiscPoint disc_point_from_frame(const std::array<double, 3>& u) const;

 private:
  QuadraticSpace space_;
  QMat S_;      // exact congruence diagonalizer, columns ordered (+,+,-)
  QVec s3_;     // third column: negative vector fixing the sheet convention
  std::array<double, 9> E_;     // float frame basis (columns) in space coords
  std::array<double, 9> Einv_;  // inverse
};

// Geodesic of the disc: rational (1,1) plane plus its positive normal line.
struct Geodesic {
  Subspace plane;
  QVec normal;  // primitive, <n,n> > 0
};

Geodesic geodesic_from_plane(const QuadraticSpace& s, const Subspace& plane);
Geodesic geodesic_from_normal(const QuadraticSpace& s, const QVec& n);
Geodesic transform_geodesic(const QuadraticSpace& s, const Geodesic& g, const QMat& m);

// Chord endpoints ordered by increasing theta; exact vectors filled in when
// the defining quadratic has a rational root.
std::array<BoundaryPoint, 2> endpoints(const KleinFrame& f, const Geodesic& g);

bool geodesics_orthogonal(const QuadraticSpace& s, const Geodesic& a, const Geodesic& b);

// Reflection of a boundary point across a geodesic; exact in, exact out.
// Throws std::domain_error when v lies on the geodesic.
BoundaryPoint reflect_boundary_point(const KleinFrame& f, const BoundaryPoint& v,
                                     const Geodesic& g);

enum class IsometryClass { Identity, Elliptic, Parabolic, Hyperbolic, OrientationReversing };
std::string to_string(IsometryClass c);

struct ClassifiedIsometry {
  IsometryClass cls = IsometryClass::Identity;
  double trace = 0;                  // of the sheet-preserving representative
  std::array<double, 9> frame{};     // frame action of that representative
  std::optional<BoundaryPoint> attractor;  // hyperbolic; parabolic fixed point lives here
  std::optional<BoundaryPoint> repeller;
  std::optional<DiscPoint> interior_fixed;  // elliptic center
};

// Exact classification; m must be a rational isometry of the form.
ClassifiedIsometry classify_isometry(const KleinFrame& f, const QMat& m);
// Float classification with the documented tolerances.
ClassifiedIsometry classify_isometry(const KleinFrame& f, const std::array<double, 9>& m_space);

struct PowerIterateResult {
  bool converged = false;
  int n = 0;
  BoundaryPoint point;
  double final_distance = 0;
  std::vector<double> thetas;  // trajectory, one entry per step
};

// Iterates u under gamma until within tol of the forward fixed point.
// gamma must be parabolic or hyperbolic; u equal to the repelling fixed point
// is an error.
PowerIterateResult power_iterate(const KleinFrame& f, const ClassifiedIsometry& gamma,
                                 const BoundaryPoint& u, int n_max, double tol);

inline double boundary_distance(const BoundaryPoint& a, const BoundaryPoint& b) {
  return angle_distance(a.theta, b.theta);
}

}  // namespace denseorbit
