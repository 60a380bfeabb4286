#pragma once

#include <gmpxx.h>

#include <string>
#include <utility>
#include <string_view>

namespace relv {

/// Exact arbitrary-precision rational. Every quantity the choice rules touch
/// (probabilities, deontic weights, values, grains) is one of these.
/// Unlike a bare mpq_class, the numerator/denominator constructor reduces to
/// lowest terms.
class Rational : public mpq_class {
 public:
  using mpq_class::mpq_class;
  Rational() = default;
  Rational(const mpq_class& q) : mpq_class(q) {}
  Rational(mpq_class&& q) : mpq_class(std::move(q)) {}
  Rational(const mpz_class& num, const mpz_class& den) : mpq_class(num, den) { canonicalize(); }
};

/// Parses "p/q", an integer, or a decimal with optional exponent ("0.01",
/// "-1.5e3") into an exact rational. Throws std::invalid_argument on bad text.
Rational parse_rational(std::string_view text);

/// Canonical text: "p/q" in lowest terms, or "p" when the denominator is 1.
std::string to_string(const Rational& q);

inline double to_double(const Rational& q) { return q.get_d(); }

inline int sign(const Rational& q) { return sgn(q); }

}  // namespace relv
