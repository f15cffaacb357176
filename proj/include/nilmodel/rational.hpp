#pragma once

#include <gmpxx.h>

#include <string>

namespace nilmodel {

using Rational = mpq_class;

/// Largest integer not exceeding q.
mpz_class floor(const Rational& q);

/// Fractional part in [0, 1).
Rational frac(const Rational& q);

/// "p/q" with an explicit denominator, e.g. "0/1", "-3/2".
std::string to_string(const Rational& q);

/// Accepts "p/q", "p", or a decimal such as "0.25" (converted exactly).
Rational parse_rational(const std::string& s);

/// num/den from 64-bit integers (long is 64-bit on the supported targets).
inline Rational make_rational(long long num, long long den = 1) {
  static_assert(sizeof(long) == sizeof(long long));
  Rational q(mpz_class(static_cast<long>(num)), mpz_class(static_cast<long>(den)));
  q.canonicalize();
  return q;
}

/// Exact binary value of a finite double.
inline Rational exact(double v) { return Rational(v); }

inline double to_double(const Rational& q) { return q.get_d(); }

}  // namespace nilmodel
