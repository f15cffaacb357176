#pragma once

#include <Eigen/Core>

#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/conjugacy.hpp"
#include "nilmodel/heis.hpp"
#include "nilmodel/torus.hpp"

namespace nilmodel {

/// U * M * V = D with U, V unimodular and d_1 | d_2 | ... on the diagonal.
struct SmithNormalForm {
  IntMatrix U;
  IntMatrix V;
  IntMatrix D;

  std::vector<long long> diagonal() const;
};

SmithNormalForm smith_normal_form(const IntMatrix& M);

/// Solutions of (A^m - I) x in Z^n on T^n, each checked exactly.
/// Throws SingularAtM when det(A^m - I) = 0.
std::vector<BasePoint> enumerate_fixed_points(const IntMatrix& A, int m);

/// det(I - A^m) over the integers.
long long lefschetz_number(const IntMatrix& A, int m);

struct LefschetzReport {
  int m = 0;
  long long lefschetz = 0;
  long long count = 0;
  double eigen_product = 0.0;  // prod |1 - lambda_i^m|
  std::vector<BasePoint> fixed_points;
};

LefschetzReport lefschetz_report(const IntMatrix& A, int m);

struct PeriodicRefinement {
  int m = 0;
  long long expected = 0;  // |L(A^m)|
  std::vector<Eigen::Vector2d> points;
  std::vector<Eigen::Vector2d> seeds;
  double max_residual = 0.0;
  int lost_seeds = 0;
};

/// Newton for f^m(x) = x seeded at h^-1 of each fixed point of A^m, with
/// steps confined to 3 sup|u| around the seed; duplicates within 1e-9 are
/// merged. Throws CountMismatch unless |L(A^m)| points survive.
PeriodicRefinement refine_periodic_points(const TorusMap& f, const IntMatrix2& A, const DisplacementField& h,
                                          int m);

}  // namespace nilmodel
