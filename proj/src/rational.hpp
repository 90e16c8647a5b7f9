#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>
#include <vector>

namespace denseorbit {

using Int = mpz_class;
using Rat = mpq_class;
using QVec = std::vector<Rat>;
using ZVec = std::vector<Int>;

inline Rat rat(long num, long den = 1) {
  Rat q(num, den);
  q.canonicalize();
  return q;
}

// "p/q" with q omitted when 1; denominator always positive.
std::string rat_to_string(const Rat& q);

// Accepts "p", "p/q", optional leading '-'. Throws std::invalid_argument.
Rat rat_from_string(const std::string& s);

// Square root when the argument is a perfect square of a rational.
std::optional<Rat> exact_sqrt(const Rat& q);

// Best rational approximation with denominator <= denom_bound, via the
// continued fraction of the exact dyadic value of x.
Rat rat_from_double(double x, const Int& denom_bound);

inline double rat_to_double(const Rat& q) { return q.get_d(); }

std::string vec_to_string(const QVec& v);

}  // namespace denseorbit
