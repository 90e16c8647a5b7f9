#include "rational.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

std::string rat_to_string(const Rat& q) {
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

Rat rat_from_string(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '/' ) continue;
    if (c == '-' && (i == 0 || s[i - 1] == '/')) continue;
    if (c == '+' && (i == 0 || s[i - 1] == '/')) continue;
    throw std::invalid_argument("bad rational literal: " + s);
  }
  Rat q;
  if (q.set_str(s, 10) != 0) throw std::invalid_argument("bad rational literal: " + s);
  if (q.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  q.canonicalize();
  return q;
}

std::optional<Rat> exact_sqrt(const Rat& q) {
  if (q < 0) return std::nullopt;
  if (q == 0) return Rat(0);
  mpz_class num = q.get_num(), den = q.get_den();
  mpz_class rn, rd;
  if (mpz_perfect_square_p(num.get_mpz_t()) == 0) return std::nullopt;
  if (mpz_perfect_square_p(den.get_mpz_t()) == 0) return std::nullopt;
  mpz_sqrt(rn.get_mpz_t(), num.get_mpz_t());
  mpz_sqrt(rd.get_mpz_t(), den.get_mpz_t());
  Rat r(rn, rd);
  r.canonicalize();
  return r;
}

Rat rat_from_double(double x, const Int& denom_bound) {
  if (!std::isfinite(x)) throw std::invalid_argument("non-finite double");
  if (denom_bound < 1) throw std::invalid_argument("denominator bound must be >= 1");
  Rat exact(x);  // dyadic, exact
  exact.canonicalize();
  if (exact.get_den() <= denom_bound) return exact;

  bool neg = exact < 0;
  Rat v = neg ? Rat(-exact) : exact;

  // Convergents of the continued fraction of v, with a final semiconvergent.
  Int h1 = 1, h2 = 0, k1 = 0, k2 = 1;  // h1/k1 is the latest convergent
  Rat rem = v;
  for (int iter = 0; iter < 128; ++iter) {
    Int a;
    mpz_fdiv_q(a.get_mpz_t(), rem.get_num().get_mpz_t(), rem.get_den().get_mpz_t());
    Int h = a * h1 + h2, k = a * k1 + k2;
    if (k > denom_bound) {
      // Largest partial quotient keeping the denominator in bounds.
      Int acap = (denom_bound - k2) / k1;
      Rat best(h1, k1 == 0 ? Int(1) : k1);
      best.canonicalize();
      if (acap >= 1) {
        Rat semi(acap * h1 + h2, acap * k1 + k2);
        semi.canonicalize();
        if (abs(v - semi) <= abs(v - best)) best = semi;
      }
      return neg ? Rat(-best) : best;
    }
    h2 = h1; h1 = h; k2 = k1; k1 = k;
    Rat frac = rem - Rat(a);
    if (frac == 0) break;
    rem = Rat(1) / frac;
  }
  Rat out(h1, k1);
  out.canonicalize();
  return neg ? Rat(-out) : out;
}

std::string vec_to_string(const QVec& v) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << rat_to_string(v[i]);
  }
  os << ")";
  return os.str();
}

}  // namespace denseorbit
