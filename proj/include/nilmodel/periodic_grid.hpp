#pragma once

#include <Eigen/Core>

#include <vector>

namespace nilmodel {

/// Scalar field on an N x N grid over T^2 (node (i,j) sits at (i/N, j/N))
/// with periodic bicubic (Catmull-Rom) interpolation. Interpolation is exact
/// at nodes; coordinates within 1e-9 cells of a node snap onto it.
class PeriodicGrid {
 public:
  PeriodicGrid() = default;
  explicit PeriodicGrid(int n, double fill = 0.0) : n_(n), values_(std::size_t(n) * n, fill) {}

  int size() const { return n_; }

  double& at(int i, int j) { return values_[index(i, j)]; }
  double at(int i, int j) const { return values_[index(i, j)]; }

  Eigen::Vector2d node(int i, int j) const { return {double(i) / n_, double(j) / n_}; }

  double operator()(const Eigen::Vector2d& p) const;

  double sup_norm() const;
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  std::size_t index(int i, int j) const {
    i %= n_;
    j %= n_;
    if (i < 0) i += n_;
    if (j < 0) j += n_;
    return std::size_t(i) * n_ + std::size_t(j);
  }

  int n_ = 0;
  std::vector<double> values_;
};

double sup_distance(const PeriodicGrid& a, const PeriodicGrid& b);

/// Pair of PeriodicGrids read as a 2-vector field.
struct PeriodicGrid2 {
  PeriodicGrid c0;
  PeriodicGrid c1;

  PeriodicGrid2() = default;
  explicit PeriodicGrid2(int n) : c0(n), c1(n) {}

  int size() const { return c0.size(); }
  Eigen::Vector2d at(int i, int j) const { return {c0.at(i, j), c1.at(i, j)}; }
  void set(int i, int j, const Eigen::Vector2d& v) {
    c0.at(i, j) = v.x();
    c1.at(i, j) = v.y();
  }
  Eigen::Vector2d operator()(const Eigen::Vector2d& p) const { return {c0(p), c1(p)}; }
  double sup_norm() const;
};

double sup_distance(const PeriodicGrid2& a, const PeriodicGrid2& b);

}  // namespace nilmodel
