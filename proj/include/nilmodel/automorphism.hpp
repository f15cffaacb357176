#pragma once

#include <Eigen/Core>

#include <complex>
#include <string>
#include <vector>

#include "nilmodel/heis.hpp"

namespace nilmodel {

using IntMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using IntMatrix2 = Eigen::Matrix<long long, 2, 2>;

long long determinant(const IntMatrix& m);
IntMatrix matrix_power(const IntMatrix& m, int k);

/// z-component of an automorphism:
/// zz*z + xx*x^2 + yy*y^2 + xy*x*y + x1*x + y1*y.
struct ZPolynomial {
  Rational zz{1};
  Rational xx{0};
  Rational yy{0};
  Rational xy{0};
  Rational x1{0};
  Rational y1{0};

  bool operator==(const ZPolynomial&) const = default;

  /// Human-readable form such as "z+x^2+y^2/2+xy".
  std::string to_string() const;
};

/// phi(x,y,z) = (ax+by, cx+dy, poly(x,y,z)) with M = [[a,b],[c,d]].
struct HeisAutomorphism {
  IntMatrix2 M = IntMatrix2::Identity();
  ZPolynomial poly;

  long long det() const { return M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0); }
};

/// Builds the unique automorphism with abelianization M and linear
/// z-coefficients r = r2/2, s = s2/2. The quadratic part is forced by the
/// homomorphism identity: (ac/2) x^2 + (bd/2) y^2 + bc xy, and e = det M.
HeisAutomorphism make_automorphism(const IntMatrix2& M, long r2, long s2);

/// Validates an explicitly given polynomial (unimodularity, exact
/// homomorphism identity on seeded random rationals, Gamma-preservation on the
/// generators) and throws the corresponding ErrorCode on failure.
HeisAutomorphism make_automorphism(const IntMatrix2& M, const ZPolynomial& poly);

/// f0(x,y,z) = (2x+y, x+y, z + x^2 + y^2/2 + xy).
HeisAutomorphism f0();

HeisQ apply(const HeisAutomorphism& phi, const HeisQ& g);
HeisD apply(const HeisAutomorphism& phi, const HeisD& g);

NilPoint apply(const HeisAutomorphism& phi, const NilPoint& p);

/// phi o psi.
HeisAutomorphism compose(const HeisAutomorphism& phi, const HeisAutomorphism& psi);

IntMatrix2 abelianization(const HeisAutomorphism& phi);

/// Derivative at the identity in the basis (d/dx, d/dy, d/dz); also the
/// constant frame Jacobian of phi.
Eigen::Matrix3d lie_derivative(const HeisAutomorphism& phi);

struct HyperbolicityCertificate {
  IntMatrix matrix;
  std::vector<std::complex<double>> eigenvalues;
  double gap = 0.0;             // min | |lambda_i| - 1 |
  double lambda = 0.0;          // min |lambda_i| over the unstable part
  double lambda_s = 0.0;        // max |lambda_i| over the stable part
  bool hyperbolic = false;
  bool exact_witness = false;   // decided by an integer inequality
  Eigen::MatrixXd unstable_basis;  // columns, unit length
  Eigen::MatrixXd stable_basis;

  /// Columns [unstable | stable]; real invariant-plane bases for complex pairs.
  Eigen::MatrixXd eigenbasis() const;
};

inline constexpr double kHyperbolicityTolerance = 1e-9;

/// Never throws for square input; see certify_hyperbolic.
HyperbolicityCertificate hyperbolicity_certificate(const IntMatrix& M);

/// As hyperbolicity_certificate, but throws NotCertified unless hyperbolic
/// and NotUnimodular unless |det M| = 1.
HyperbolicityCertificate certify_hyperbolic(const IntMatrix& M);

/// 2x2 unimodular predicate: det = 1 needs |tr| >= 3, det = -1 needs tr != 0.
bool is_hyperbolic_2x2(const IntMatrix2& M);

}  // namespace nilmodel
