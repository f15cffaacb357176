#include "nilmodel/torus.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double FourierSeries::value(const Eigen::Vector2d& p) const {
  double acc = 0.0;
  for (const auto& m : modes) {
    const double ph = kTwoPi * (m.kx * p.x() + m.ky * p.y());
    acc += m.cos * std::cos(ph) + m.sin * std::sin(ph);
  }
  return acc;
}

Eigen::Vector2d FourierSeries::gradient(const Eigen::Vector2d& p) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const auto& m : modes) {
    const double ph = kTwoPi * (m.kx * p.x() + m.ky * p.y());
    const double d = kTwoPi * (-m.cos * std::sin(ph) + m.sin * std::cos(ph));
    g.x() += d * m.kx;
    g.y() += d * m.ky;
  }
  return g;
}

double FourierSeries::value_gradient(const Eigen::Vector2d& p, Eigen::Vector2d& grad) const {
  double acc = 0.0;
  grad.setZero();
  for (const auto& m : modes) {
    const double ph = kTwoPi * (m.kx * p.x() + m.ky * p.y());
    const double s = std::sin(ph), c = std::cos(ph);
    acc += m.cos * c + m.sin * s;
    const double d = kTwoPi * (m.sin * c - m.cos * s);
    grad.x() += d * m.kx;
    grad.y() += d * m.ky;
  }
  return acc;
}

double FourierSeries::amplitude_bound() const {
  double acc = 0.0;
  for (const auto& m : modes) acc += std::abs(m.cos) + std::abs(m.sin);
  return acc;
}

double FourierSeries::gradient_bound() const {
  double acc = 0.0;
  for (const auto& m : modes) {
    acc += kTwoPi * std::hypot(double(m.kx), double(m.ky)) * (std::abs(m.cos) + std::abs(m.sin));
  }
  return acc;
}

TorusMap::TorusMap(IntMatrix2 linear, std::array<FourierSeries, 2> modes, double scale)
    : linear_(linear) {
  for (auto& s : modes) {
    for (auto& m : s.modes) {
      if (std::abs(m.kx) > FourierSeries::kMaxDegree || std::abs(m.ky) > FourierSeries::kMaxDegree) {
        throw Error(ErrorCode::InvalidConfig, "Fourier degree above 4");
      }
      m.cos *= scale;
      m.sin *= scale;
    }
  }
  displacement_ = std::move(modes);
}

TorusMap::TorusMap(IntMatrix2 linear, PeriodicGrid2 grid)
    : linear_(linear), displacement_(std::move(grid)) {}

Eigen::Vector2d TorusMap::periodic_part(const Eigen::Vector2d& x) const {
  if (const auto* f = std::get_if<std::array<FourierSeries, 2>>(&displacement_)) {
    return {(*f)[0].value(x), (*f)[1].value(x)};
  }
  return std::get<PeriodicGrid2>(displacement_)(x);
}

Eigen::Vector2d TorusMap::lift(const Eigen::Vector2d& x) const {
  return linear_d() * x + periodic_part(x);
}

Eigen::Vector2d TorusMap::operator()(const Eigen::Vector2d& x) const { return wrap(lift(x)); }

Eigen::Matrix2d TorusMap::jacobian(const Eigen::Vector2d& x) const {
  Eigen::Matrix2d J = linear_d();
  if (const auto* f = std::get_if<std::array<FourierSeries, 2>>(&displacement_)) {
    J.row(0) += (*f)[0].gradient(x).transpose();
    J.row(1) += (*f)[1].gradient(x).transpose();
  } else {
    const auto& g = std::get<PeriodicGrid2>(displacement_);
    const double h = 1e-5;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(k) = h;
      J.col(k) += (g(x + e) - g(x - e)) / (2.0 * h);
    }
  }
  return J;
}

Eigen::Vector2d TorusMap::inverse_lift(const Eigen::Vector2d& y, int iterations, double tol) const {
  const Eigen::Matrix2d A = linear_d();
  Eigen::Vector2d x = A.inverse() * y;
  if (is_linear()) return x;
  const auto* fourier = std::get_if<std::array<FourierSeries, 2>>(&displacement_);
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= iterations; ++it) {
    Eigen::Vector2d r;
    Eigen::Matrix2d J = A;
    if (fourier) {
      Eigen::Vector2d g0, g1;
      r = A * x + Eigen::Vector2d((*fourier)[0].value_gradient(x, g0), (*fourier)[1].value_gradient(x, g1)) - y;
      J.row(0) += g0.transpose();
      J.row(1) += g1.transpose();
    } else {
      r = lift(x) - y;
      J = jacobian(x);
    }
    res = r.norm();
    if (res < tol || it == iterations) break;
    const double det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
    x -= Eigen::Vector2d(J(1, 1) * r.x() - J(0, 1) * r.y(), J(0, 0) * r.y() - J(1, 0) * r.x()) / det;
  }
  if (res > 1e-10) {
    std::ostringstream os;
    os << "inverse Newton residual " << res;
    throw Error(ErrorCode::NewtonDiverged, os.str());
  }
  return x;
}

bool TorusMap::is_linear() const {
  if (const auto* f = std::get_if<std::array<FourierSeries, 2>>(&displacement_)) {
    return (*f)[0].empty() && (*f)[1].empty();
  }
  return false;
}

double TorusMap::min_jacobian_determinant(int n) const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      m = std::min(m, std::abs(jacobian({double(i) / n, double(j) / n}).determinant()));
    }
  }
  return m;
}

IntMatrix2 induced_matrix(const LiftFunction& lift) {
  const Eigen::Vector2d bases[] = {{0.0, 0.0}, {0.3141, 0.2718}, {0.7071, 0.5772}};
  IntMatrix2 result;
  bool have = false;
  for (const auto& x0 : bases) {
    const Eigen::Vector2d f0 = lift(x0);
    IntMatrix2 cols;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(j) = 1.0;
      const Eigen::Vector2d c = lift(x0 + e) - f0;
      for (int i = 0; i < 2; ++i) {
        const double r = std::round(c(i));
        if (std::abs(c(i) - r) > 1e-6) {
          std::ostringstream os;
          os << "period column entry " << c(i) << " is not an integer";
          throw Error(ErrorCode::NonIntegerPeriods, os.str());
        }
        cols(i, j) = static_cast<long long>(r);
      }
    }
    if (have && cols != result) {
      throw Error(ErrorCode::BasepointInconsistency, "period matrix depends on the base point");
    }
    result = cols;
    have = true;
  }
  return result;
}

IntMatrix2 induced_matrix(const TorusMap& f) {
  return induced_matrix([&f](const Eigen::Vector2d& x) { return f.lift(x); });
}

}  // namespace nilmodel
