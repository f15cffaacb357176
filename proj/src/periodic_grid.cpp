#include "nilmodel/periodic_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace nilmodel {

namespace {

constexpr double kSnap = 1e-9;

std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
          0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)};
}

void locate(double coord, int n, int& cell, double& t) {
  double s = coord * n;
  const double r = std::round(s);
  if (std::abs(s - r) < kSnap) s = r;
  const double f = std::floor(s);
  cell = static_cast<int>(static_cast<long long>(f) % n);
  if (cell < 0) cell += n;
  t = s - f;
}

}  // namespace

double PeriodicGrid::operator()(const Eigen::Vector2d& p) const {
  int ci, cj;
  double ti, tj;
  locate(p.x(), n_, ci, ti);
  locate(p.y(), n_, cj, tj);
  if (ti == 0.0 && tj == 0.0) return at(ci, cj);
  const auto wi = catmull_rom_weights(ti);
  const auto wj = catmull_rom_weights(tj);
  double acc = 0.0;
  for (int a = 0; a < 4; ++a) {
    if (wi[a] == 0.0) continue;
    double row = 0.0;
    for (int b = 0; b < 4; ++b) {
      if (wj[b] == 0.0) continue;
      row += wj[b] * at(ci + a - 1, cj + b - 1);
    }
    acc += wi[a] * row;
  }
  return acc;
}

double PeriodicGrid::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double sup_distance(const PeriodicGrid& a, const PeriodicGrid& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  }
  return m;
}

double PeriodicGrid2::sup_norm() const {
  double m = 0.0;
  for (std::size_t k = 0; k < c0.values().size(); ++k) {
    m = std::max(m, std::hypot(c0.values()[k], c1.values()[k]));
  }
  return m;
}

double sup_distance(const PeriodicGrid2& a, const PeriodicGrid2& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.c0.values().size(); ++k) {
    m = std::max(m, std::hypot(a.c0.values()[k] - b.c0.values()[k],
                               a.c1.values()[k] - b.c1.values()[k]));
  }
  return m;
}

}  // namespace nilmodel
