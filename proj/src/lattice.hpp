#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quadratic_space.hpp"

namespace denseorbit {

// Free Z-module of finite rank inside a rational quadratic space.
struct Lattice {
  QuadraticSpace ambient;
  std::vector<QVec> basis;  // independent, ambient coordinates

  Lattice() = default;
  Lattice(QuadraticSpace amb, std::vector<QVec> b);  // throws if dependent

  int rank() const { return static_cast<int>(basis.size()); }
  QMat basis_matrix() const { return QMat::from_cols(basis); }
  // Gram matrix of the form on the basis.
  QMat gram_on_basis() const;

  // Coordinates of v on the basis, if v lies in the rational span.
  std::optional<QVec> coords(const QVec& v) const;
  bool contains(const QVec& v) const;  // integer coordinates
  Subspace rational_span() const;
};

// Canonical basis of the lattice spanned by the given vectors (Hermite normal
// form after clearing denominators). Input vectors may be dependent.
std::vector<QVec> canonical_lattice_basis(int ambient_dim, const std::vector<QVec>& gens);

// L ∩ W for a rational subspace W; the result is saturated in L.
Lattice saturate(const Lattice& l, const Subspace& w);

Lattice lattice_sum(const Lattice& a, const Lattice& b);
Lattice lattice_intersect(const Lattice& a, const Lattice& b);

struct IndexResult {
  bool finite = false;
  Int index = 0;  // meaningful when finite
};
// [sup : sub]; throws std::invalid_argument when sub is not contained in sup.
IndexResult index_in(const Lattice& sub, const Lattice& sup);

struct IntegralIsometry {
  QMat ambient;       // action on the ambient space
  ZMat on_lattice;    // action on lattice coordinates, det = ±1
  std::string provenance;
};

bool is_integral_isometry(const Lattice& l, const QMat& m);
// Additionally requires m to stabilize `sub`.
bool is_integral_isometry(const Lattice& l, const QMat& m, const Lattice& sub);
ZMat lattice_action(const Lattice& l, const QMat& m);  // throws if not integral

// Reflection in r when it maps L to L; nullopt when not integral. Throws
// std::domain_error when r is isotropic.
std::optional<IntegralIsometry> reflection_in_vector(const Lattice& l, const QVec& r);

struct Preset {
  std::string name;
  Lattice lattice;
  std::vector<IntegralIsometry> generators;
};

Preset preset(const std::string& name);  // throws std::invalid_argument on unknown name
std::vector<std::string> preset_names();

}  // namespace denseorbit
