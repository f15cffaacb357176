#include "nilmodel/errors.hpp"
#include "nilmodel/rational.hpp"

#include <stdexcept>

namespace nilmodel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::HomomorphismViolation: return "HomomorphismViolation";
    case ErrorCode::LatticeNotPreserved: return "LatticeNotPreserved";
    case ErrorCode::NonIntegerPeriods: return "NonIntegerPeriods";
    case ErrorCode::BasepointInconsistency: return "BasepointInconsistency";
    case ErrorCode::NotCertified: return "NotCertified";
    case ErrorCode::NotEquivariant: return "NotEquivariant";
    case ErrorCode::NotHyperbolic: return "NotHyperbolic";
    case ErrorCode::DegreeMismatch: return "DegreeMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::PullbackFailed: return "PullbackFailed";
    case ErrorCode::SingularAtM: return "SingularAtM";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::ReductionDiverged: return "ReductionDiverged";
    case ErrorCode::ChartRefinementFailed: return "ChartRefinementFailed";
    case ErrorCode::NotCohomologous: return "NotCohomologous";
    case ErrorCode::InconsistentRotationField: return "InconsistentRotationField";
    case ErrorCode::NotFibered: return "NotFibered";
    case ErrorCode::NotContracting: return "NotContracting";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

mpz_class floor(const Rational& q) {
  mpz_class r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

Rational frac(const Rational& q) { return q - Rational(floor(q)); }

std::string to_string(const Rational& q) {
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

Rational parse_rational(const std::string& s) {
  if (s.find('.') != std::string::npos || s.find('e') != std::string::npos ||
      s.find('E') != std::string::npos) {
    // Decimal literal: read the digits exactly rather than through a double.
    const auto epos = s.find_first_of("eE");
    const std::string mant = s.substr(0, epos);
    long exp10 = epos == std::string::npos ? 0 : std::stol(s.substr(epos + 1));
    std::string digits;
    bool neg = false;
    long frac_digits = 0;
    bool seen_dot = false;
    for (char c : mant) {
      if (c == '-') neg = true;
      else if (c == '+') continue;
      else if (c == '.') seen_dot = true;
      else if (c >= '0' && c <= '9') {
        digits.push_back(c);
        if (seen_dot) ++frac_digits;
      } else {
        throw Error(ErrorCode::InvalidConfig, "bad rational literal '" + s + "'");
      }
    }
    if (digits.empty()) throw Error(ErrorCode::InvalidConfig, "bad rational literal '" + s + "'");
    Rational r{mpz_class(digits, 10)};
    long shift = exp10 - frac_digits;
    mpz_class ten = 1;
    mpz_ui_pow_ui(ten.get_mpz_t(), 10, static_cast<unsigned long>(shift < 0 ? -shift : shift));
    if (shift < 0) r /= Rational(ten);
    else r *= Rational(ten);
    r.canonicalize();
    return neg ? Rational(-r) : r;
  }
  Rational r;
  if (r.set_str(s, 10) != 0) throw Error(ErrorCode::InvalidConfig, "bad rational literal '" + s + "'");
  if (r.get_den() == 0) throw Error(ErrorCode::InvalidConfig, "zero denominator in '" + s + "'");
  r.canonicalize();
  return r;
}

}  // namespace nilmodel
