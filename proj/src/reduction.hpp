#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyperbolic.hpp"

namespace denseorbit {

// Principal-angle distance between subspaces of equal dimension (<= 2),
// sqrt(theta1^2 + theta2^2) under the standard Euclidean inner product.
double plane_distance(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b);
double plane_distance(const Subspace& a, const Subspace& b);
double plane_distance(const Subspace& a, const std::vector<std::vector<double>>& b);

// Entry-wise continued-fraction rationalization of a float basis, then exact
// canonicalization and signature check.
struct RationalizedPlane {
  Subspace plane;
  double distance = 0;  // to the float input
};
RationalizedPlane rationalize_plane(const QuadraticSpace& s,
                                    const std::vector<std::vector<double>>& basis,
                                    const Int& denom_bound, const Signature& want);

// Deterministic 4-dimensional (3,1) envelope of C + Ql inside the ambient
// space, built from lattice basis vectors and their pairwise sums.
Subspace build_U0(const QuadraticSpace& v, const Lattice& l, const Subspace& c, const QVec& lvec);

struct SplitLattice {
  Lattice in_w;      // saturate(M, W)
  Lattice in_perp;   // saturate(M, W-perp)
  Int index = 0;     // [M : in_w + in_perp], finite
};
SplitLattice split_lattice(const Lattice& m, const Subspace& w);

// Orthogonal complement with an exact signature check; maps positive-definite
// planes to (1,1) planes and back inside a (3,1) space.
Subspace dualize(const QuadraticSpace& u, const Subspace& c, const Signature& want);

// span{l} + g0, with an exact (2,1) check.
Subspace build_W(const QuadraticSpace& u, const QVec& l_u, const Subspace& g0);

struct TraceStage {
  std::string stage;
  nlohmann::ordered_json data;
};

// One generator of the search group: action on the rank-3 lattice coordinates
// plus its lift to the original lattice.
struct Generator {
  QMat mat3;       // 3x3, integer entries, isometry of the reduced form
  QMat lift;       // n x n action on original lattice coordinates
  std::string provenance;
  bool involution = false;
};

struct DescentContext {
  QuadraticSpace V;   // original ambient space, lattice coordinates
  Lattice L;          // original lattice (identity basis in its own coordinates)
  QVec l;             // primitive vector of L
  Subspace target;    // rational target plane in V
  double target_input_distance = 0;  // rationalization distance when input was float

  Subspace U0;        // 4-dim (3,1) envelope in V
  QuadraticSpace U;   // form on U0's canonical basis
  QVec l_U;
  Subspace C_U;
  Lattice M_U;        // saturate(L, U0) in U coordinates
  Subspace G0_U;      // dual (1,1) plane in U
  Subspace W_U;       // 3-dim (2,1) subspace of U
  Int split_index = 0;

  QMat embed_U;       // V.dim x 4, columns = U0 basis
  QMat embed_3U;      // 4 x 3, columns = lattice3 basis in U coordinates
  QMat embed_3V;      // V.dim x 3
  std::vector<TraceStage> trace;
};

// Self-contained search problem in a signature (2,1) space whose lattice is
// Z^3 in the given coordinates.
struct HyperbolicProblem {
  QuadraticSpace space3;
  Lattice lattice3;                 // identity basis
  std::vector<Generator> generators;
  QVec l3;
  std::optional<Geodesic> source;   // l3-perp when <l3,l3> > 0
  Geodesic target;
  std::shared_ptr<DescentContext> ctx;  // null for direct 3-dimensional problems
};

struct DescentConfig {
  Int denom_bound = 10000;
  int reflection_height = 6;
  int max_generators = 48;
  int min_generators = 2;
  int assembly_height = 10;
  int automorph_power_cap = 40;
};

// Steps 1-4 for a positive vector l and a positive-definite target plane in a
// space of signature (s_plus >= 3, 1). Throws std::runtime_error with a
// description when no integral reflections can be harvested.
HyperbolicProblem descend(const QuadraticSpace& v, const Lattice& l, const QVec& lvec,
                          const Subspace& target, const DescentConfig& cfg);

// Harvest of integral reflections for a direct (2,1) problem or after descent:
// reflections in vectors of the rank-3 lattice, integral on the full lattice.
std::vector<Generator> harvest_reflections(const QuadraticSpace& space3, const Lattice& ambient,
                                           const QMat& embed_to_ambient, int height,
                                           int max_generators);

// Fundamental solution of s^2 - d u^2 = 1 for d > 0, by the continued
// fraction of sqrt(d); nullopt when d is a square or the expansion exceeds
// max_steps / bit_cap.
std::optional<std::pair<Int, Int>> pell_fundamental(const Int& d, int max_steps,
                                                    size_t bit_cap = 4096);

// Mirror walls of the reflection subgroup, enumerated outward from a negative
// center vector and kept when they bound a common chamber (pairwise non-obtuse
// angles). `closed` reports whether the accepted mirrors fence in the whole
// boundary circle, which certifies that the reflections they define generate a
// finite-covolume group. Requires an integral Gram matrix; the rank-3 lattice
// is taken to be Z^3 in these coordinates.
struct WallHarvest {
  std::vector<QVec> roots;
  bool closed = false;
};
WallHarvest harvest_walls(const QuadraticSpace& space3);

// Isometry fixing l3 and acting as a unit automorph on the rank-2 sublattice
// orthogonal to l3; the first power that is integral on the rank-3 lattice
// and on the ambient one. Empty when that sublattice is definite or
// degenerate, or when no power within power_cap is integral.
std::vector<Generator> harvest_automorphs(const QuadraticSpace& space3, const Lattice& ambient,
                                          const QMat& embed_to_ambient, const QVec& l3,
                                          int power_cap);

// Direct assembly of small integral isometries: integer columns matching the
// Gram matrix entry by entry. Skips matrices whose key is already in `seen`.
std::vector<Generator> harvest_assembled(const QuadraticSpace& space3, const Lattice& ambient,
                                         const QMat& embed_to_ambient, int height, int max_out,
                                         std::set<std::string>& seen);

// Stabilizer of the geodesic whose normal is plane_normal: a unit automorph
// of the rank-2 sublattice orthogonal to the normal (generous continued
// fraction caps, since this discriminant comes from the target and can be
// large), plus unipotent transvections along the rational isotropic rays when
// the restricted form has square discriminant. Fixed boundary points of these
// elements are exactly the endpoints of that geodesic, which is what makes
// them worth the large entries.
std::vector<Generator> harvest_plane_stabilizer(const QuadraticSpace& space3,
                                                const Lattice& ambient,
                                                const QMat& embed_to_ambient,
                                                const QVec& plane_normal, int power_cap);

// All of the above in order (target stabilizer when a target normal is given,
// walls and their liftable products, reflections with height escalation,
// automorphs, assembled), deduplicated, capped at cfg.max_generators. l3 may
// have any norm; the automorph source only fires when <l3,l3> > 0.
std::vector<Generator> harvest_generators(const QuadraticSpace& space3, const Lattice& ambient,
                                          const QMat& embed_to_ambient, const QVec& l3,
                                          const DescentConfig& cfg,
                                          const QVec* target_normal = nullptr,
                                          nlohmann::ordered_json* stats = nullptr);

}  // namespace denseorbit
