#include "nilmodel/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

namespace {

double frac_d(double v) { return v - std::floor(v); }

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

Eigen::Vector2d random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return {unit(rng), unit(rng)};
}

const std::vector<double>& theta_samples() {
  static const std::vector<double> t{0.0, 0.137, 0.4142, 0.618, 0.9};
  return t;
}

}  // namespace

Cover::Cover(std::vector<Chart> charts) : charts_(std::move(charts)) {
  for (const auto& c : charts_) {
    if (c.w <= 0 || c.h <= 0 || c.w >= 1 || c.h >= 1) {
      throw Error(ErrorCode::InvalidConfig, "chart sides must lie in (0, 1)");
    }
  }
}

Cover Cover::standard(const Rational& margin) {
  const Rational half = make_rational(1, 2);
  std::vector<Chart> charts;
  for (int b = 0; b < 2; ++b) {
    for (int a = 0; a < 2; ++a) charts.push_back({Rational(a * half), Rational(b * half), Rational(half + margin), Rational(half + margin)});
  }
  return Cover(std::move(charts));
}

bool Cover::contains(int i, const Eigen::Vector2d& x) const {
  const Chart& c = chart(i);
  return frac_d(x.x() - c.x0.get_d()) < c.w.get_d() && frac_d(x.y() - c.y0.get_d()) < c.h.get_d();
}

bool Cover::contains(int i, const BasePoint& x) const {
  const Chart& c = chart(i);
  return frac(x.u - c.x0) < c.w && frac(x.v - c.y0) < c.h;
}

Eigen::Vector2d Cover::local(int i, const Eigen::Vector2d& x) const {
  const Chart& c = chart(i);
  return {c.x0.get_d() + frac_d(x.x() - c.x0.get_d()), c.y0.get_d() + frac_d(x.y() - c.y0.get_d())};
}

BasePoint Cover::local(int i, const BasePoint& x) const {
  const Chart& c = chart(i);
  return {c.x0 + frac(x.u - c.x0), c.y0 + frac(x.v - c.y0)};
}

double Cover::depth(int i, const Eigen::Vector2d& x) const {
  if (!contains(i, x)) return 0.0;
  const Chart& c = chart(i);
  const double sx = frac_d(x.x() - c.x0.get_d()), sy = frac_d(x.y() - c.y0.get_d());
  return std::min({sx, c.w.get_d() - sx, sy, c.h.get_d() - sy});
}

int Cover::canonical(const Eigen::Vector2d& x) const {
  for (int i = 0; i < size(); ++i) {
    if (contains(i, x)) return i;
  }
  throw Error(ErrorCode::InvalidConfig, "point outside every chart");
}

int Cover::deepest(const Eigen::Vector2d& x) const {
  int best = -1;
  double d = -1.0;
  for (int i = 0; i < size(); ++i) {
    const double di = depth(i, x);
    if (di > d) {
      d = di;
      best = i;
    }
  }
  return best;
}

std::vector<int> Cover::charts_containing(const Eigen::Vector2d& x) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (contains(i, x)) out.push_back(i);
  }
  return out;
}

std::vector<double> Cover::partition_of_unity(const Eigen::Vector2d& x) const {
  std::vector<double> phi(charts_.size(), 0.0);
  double total = 0.0;
  for (int i = 0; i < size(); ++i) {
    if (!contains(i, x)) continue;
    const Chart& c = chart(i);
    const double w = c.w.get_d(), h = c.h.get_d();
    const double sx = frac_d(x.x() - c.x0.get_d()), sy = frac_d(x.y() - c.y0.get_d());
    const double dx = 0.2 * w, dy = 0.2 * h;
    phi[std::size_t(i)] = smooth_step(sx / dx) * smooth_step((w - sx) / dx) * smooth_step(sy / dy) *
                          smooth_step((h - sy) / dy);
    total += phi[std::size_t(i)];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidConfig, "partition of unity vanishes");
  for (double& p : phi) p /= total;
  return phi;
}

CircleCocycle identity_cocycle(const Cover& cover) {
  CircleCocycle tau;
  tau.cover = cover;
  tau.map = [](int, int, const Eigen::Vector2d&) { return CircleDiffeo::identity(); };
  tau.exact_rotation = [](int, int, const BasePoint&) { return Rational(0); };
  tau.kind = "identity";
  return tau;
}

CircleCocycle twist_cocycle(const Cover& cover, int k) {
  if (k == 0) return identity_cocycle(cover);
  CircleCocycle tau;
  tau.cover = cover;
  tau.map = [cover, k](int i, int j, const Eigen::Vector2d& x) {
    const Eigen::Vector2d li = cover.local(i, x), lj = cover.local(j, x);
    const double n = std::round(li.y() - lj.y());
    return CircleDiffeo::rotation(k * lj.x() * n);
  };
  tau.exact_rotation = [cover, k](int i, int j, const BasePoint& x) {
    const BasePoint li = cover.local(i, x), lj = cover.local(j, x);
    return frac(Rational(k) * lj.u * (li.v - lj.v));
  };
  tau.kind = "twist";
  return tau;
}

CocycleCheck check_cocycle(const CircleCocycle& tau, int samples, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Vector2d> xs(static_cast<std::size_t>(samples));
  for (auto& x : xs) x = random_point(rng);
  CocycleCheck out;
  double cocycle = 0.0, identity = 0.0, inverse = 0.0;
#pragma omp parallel for schedule(dynamic, 16) reduction(max : cocycle, identity, inverse)
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto& x = xs[s];
    const auto charts = tau.cover.charts_containing(x);
    for (int i : charts) {
      const CircleDiffeo tii = tau(i, i, x);
      for (double t : theta_samples()) identity = std::max(identity, circle_distance(tii(t), t));
      for (int j : charts) {
        const CircleDiffeo tij = tau(i, j, x), tji = tau(j, i, x);
        for (double t : theta_samples()) inverse = std::max(inverse, circle_distance(tij(tji(t)), t));
        for (int k : charts) {
          const CircleDiffeo tjk = tau(j, k, x), tik = tau(i, k, x);
          for (double t : theta_samples()) cocycle = std::max(cocycle, circle_distance(tij(tjk(t)), tik(t)));
        }
      }
    }
  }
  out.cocycle = cocycle;
  out.identity = identity;
  out.inverse = inverse;
  return out;
}

Rational check_cocycle_exact(const CircleCocycle& tau, int samples, unsigned long long seed) {
  if (!tau.exact_rotation) throw Error(ErrorCode::InvalidConfig, "cocycle has no exact rotation data");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long long> den(1, 97);
  Rational worst(0);
  auto dist0 = [](const Rational& q) {
    const Rational f = frac(q);
    return f < make_rational(1, 2) ? f : Rational(Rational(1) - f);
  };
  for (int s = 0; s < samples; ++s) {
    const long long du = den(rng), dv = den(rng);
    BasePoint x{make_rational(std::uniform_int_distribution<long long>(0, du - 1)(rng), du),
                make_rational(std::uniform_int_distribution<long long>(0, dv - 1)(rng), dv)};
    std::vector<int> charts;
    for (int i = 0; i < tau.cover.size(); ++i) {
      if (tau.cover.contains(i, x)) charts.push_back(i);
    }
    for (int i : charts) {
      worst = std::max(worst, dist0(tau.exact_rotation(i, i, x)));
      for (int j : charts) {
        worst = std::max(worst, dist0(tau.exact_rotation(i, j, x) + tau.exact_rotation(j, i, x)));
        for (int k : charts) {
          worst = std::max(worst, dist0(tau.exact_rotation(i, j, x) + tau.exact_rotation(j, k, x) -
                                        tau.exact_rotation(i, k, x)));
        }
      }
    }
  }
  return worst;
}

CircleCocycle apply_coboundary(const CircleCocycle& tau, Coboundary t) {
  CircleCocycle out;
  out.cover = tau.cover;
  out.map = [tau, t](int i, int j, const Eigen::Vector2d& x) {
    return t(i, x).inverse().compose(tau(i, j, x)).compose(t(j, x));
  };
  out.kind = "coboundary";
  return out;
}

Coboundary inverse_coboundary(Coboundary t) {
  return [t](int i, const Eigen::Vector2d& x) { return t(i, x).inverse(); };
}

double cocycle_distance(const CircleCocycle& a, const CircleCocycle& b, int samples, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Vector2d> xs(static_cast<std::size_t>(samples));
  for (auto& x : xs) x = random_point(rng);
  double worst = 0.0;
#pragma omp parallel for schedule(dynamic, 16) reduction(max : worst)
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto charts = a.cover.charts_containing(xs[s]);
    for (int i : charts) {
      for (int j : charts) {
        const CircleDiffeo fa = a(i, j, xs[s]), fb = b(i, j, xs[s]);
        for (double t : theta_samples()) worst = std::max(worst, circle_distance(fa(t), fb(t)));
      }
    }
  }
  return worst;
}

Reduction reduce_to_rotations(const CircleCocycle& tau, int samples) {
  Reduction out;
  if (tau.exact_rotation) {
    out.t = [](int, const Eigen::Vector2d&) { return CircleDiffeo::identity(); };
    out.rotations = tau;
    return out;
  }
  auto G = [tau](int i, const Eigen::Vector2d& x) {
    const auto phi = tau.cover.partition_of_unity(x);
    std::vector<std::pair<double, CircleDiffeo>> terms;
    for (int k = 0; k < tau.cover.size(); ++k) {
      if (phi[std::size_t(k)] > 0.0) terms.emplace_back(phi[std::size_t(k)], tau(k, i, x));
    }
    return CircleDiffeo::blend(terms);
  };
  out.t = [G](int i, const Eigen::Vector2d& x) { return G(i, x).inverse(); };
  out.rotations.cover = tau.cover;
  out.rotations.kind = "rotation";
  out.rotations.map = [tau, G](int i, int j, const Eigen::Vector2d& x) {
    return CircleDiffeo::rotation(G(i, x)(tau(i, j, x)(0.0)));
  };
  out.residual = cocycle_distance(apply_coboundary(tau, out.t), out.rotations, samples);
  if (!(out.residual < 1e-8)) {
    std::ostringstream os;
    os << "reduced cocycle is not rotation-valued (residual " << out.residual << ")";
    throw Error(ErrorCode::ReductionDiverged, os.str());
  }
  return out;
}

int euler_number(const CircleCocycle& tau) {
  const Cover& cover = tau.cover;
  for (int K = 32; K <= 1024; K *= 2) {
    auto vertex = [K](int a, int b) { return Eigen::Vector2d(double(a) / K, double(b) / K); };
    std::vector<int> chart(std::size_t(K) * K);
    for (int a = 0; a < K; ++a) {
      for (int b = 0; b < K; ++b) chart[std::size_t(a) * K + b] = cover.deepest(vertex(a, b));
    }
    auto chart_at = [&](int a, int b) { return chart[std::size_t((a % K + K) % K) * K + (b % K + K) % K]; };

    // Link angle from the chart of v to the chart of w, taken at the edge
    // midpoint and reduced into [-1/2, 1/2).
    bool ok = true;
    auto link = [&](int a0, int b0, int a1, int b1) {
      const int cv = chart_at(a0, b0), cw = chart_at(a1, b1);
      if (cv == cw) return 0.0;
      const Eigen::Vector2d mid = wrap(0.5 * (vertex(a0, b0) + vertex(a1, b1)));
      if (!cover.contains(cv, mid) || !cover.contains(cw, mid)) {
        ok = false;
        return 0.0;
      }
      const double r = tau(cw, cv, mid).rotation_part();
      return r - std::round(r);
    };
    long long total = 0;
    for (int a = 0; a < K && ok; ++a) {
      for (int b = 0; b < K && ok; ++b) {
        const double raw = link(a, b, a + 1, b) + link(a + 1, b, a + 1, b + 1) - link(a, b + 1, a + 1, b + 1) -
                           link(a, b, a, b + 1);
        total += std::llround(raw);
      }
    }
    if (ok) return static_cast<int>(total);
  }
  throw Error(ErrorCode::InvalidConfig, "cover too fine for the plaquette grid");
}

RotationCoboundary rotation_coboundary(const CircleCocycle& a, const CircleCocycle& b, int samples,
                                       unsigned long long seed) {
  RotationCoboundary out;
  auto d = [a, b](int i, int l, const Eigen::Vector2d& x) {
    const double v = a(i, l, x).rotation_part() - b(i, l, x).rotation_part();
    return v - std::round(v);
  };
  const Cover cover = a.cover;
  out.b = [cover, d](int i, const Eigen::Vector2d& x) {
    const auto phi = cover.partition_of_unity(x);
    double acc = 0.0;
    for (int l = 0; l < cover.size(); ++l) {
      if (phi[std::size_t(l)] > 0.0) acc += phi[std::size_t(l)] * d(i, l, x);
    }
    return acc;
  };
  // The wrapped differences make the identity hold pointwise by
  // construction; what can fail is continuity of b, which breaks where some
  // d_il wraps through 1/2. Differences of a nontrivial class must do so.
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::Vector2d x = random_point(rng);
    const auto charts = cover.charts_containing(x);
    for (int i : charts) {
      const double bi = out.b(i, x);
      for (int l : charts) {
        const double dil = std::abs(d(i, l, x));
        if (dil > 0.45) worst = std::max(worst, dil);
      }
      for (int j : charts) {
        const double lhs = a(i, j, x).rotation_part();
        const double rhs = b(i, j, x).rotation_part() + bi - out.b(j, x);
        worst = std::max(worst, circle_distance(lhs, rhs));
      }
    }
  }
  out.residual = worst;
  return out;
}

CircleCocycle pullback_cocycle(const CircleCocycle& tau, const DisplacementField& h) {
  constexpr int kSamplesPerSide = 6;
  for (int R = 8; R <= 64; R *= 2) {
    const Rational margin = make_rational(1, 4 * R);
    std::vector<Chart> rects;
    std::vector<int> assign;
    bool ok = true;
    for (int q = 0; q < R && ok; ++q) {
      for (int p = 0; p < R && ok; ++p) {
        const Chart rect{make_rational(p, R), make_rational(q, R), make_rational(1, R) + margin,
                         make_rational(1, R) + margin};
        // Images of a sample lattice on the closed rectangle.
        std::vector<Eigen::Vector2d> img;
        double spacing = 0.0;
        const double side = rect.w.get_d();
        for (int a = 0; a <= kSamplesPerSide; ++a) {
          for (int b = 0; b <= kSamplesPerSide; ++b) {
            const Eigen::Vector2d x{rect.x0.get_d() + side * a / kSamplesPerSide,
                                    rect.y0.get_d() + side * b / kSamplesPerSide};
            img.push_back(h.apply(x));
            if (b > 0) spacing = std::max(spacing, torus_distance(img.back(), img[img.size() - 2]));
            if (a > 0) {
              spacing = std::max(spacing, torus_distance(img.back(), img[img.size() - 1 - (kSamplesPerSide + 1)]));
            }
          }
        }
        int best = -1;
        double best_depth = 0.0;
        for (int c = 0; c < tau.cover.size(); ++c) {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& y : img) d = std::min(d, tau.cover.depth(c, y));
          if (d > best_depth) {
            best_depth = d;
            best = c;
          }
        }
        if (best < 0 || best_depth <= spacing) {
          ok = false;
          break;
        }
        rects.push_back(rect);
        assign.push_back(best);
      }
    }
    if (!ok) continue;

    CircleCocycle out;
    out.cover = Cover(std::move(rects));
    out.kind = "pullback";
    out.map = [tau, h, assign](int r, int s, const Eigen::Vector2d& x) {
      const int cr = assign[std::size_t(r)], cs = assign[std::size_t(s)];
      if (cr == cs) return CircleDiffeo::identity();
      return tau(cr, cs, h.apply(x));
    };
    if (tau.exact_rotation && h.sup_norm() == 0.0) {
      out.exact_rotation = [tau, assign](int r, int s, const BasePoint& x) {
        return tau.exact_rotation(assign[std::size_t(r)], assign[std::size_t(s)], x);
      };
    }
    return out;
  }
  throw Error(ErrorCode::ChartRefinementFailed, "no chart assignment up to a 64 x 64 refinement");
}

BundlePoint to_chart(const CircleCocycle& tau, const BundlePoint& p, int j) {
  if (!tau.cover.contains(j, p.base)) throw Error(ErrorCode::InvalidConfig, "target chart misses the base point");
  return {j, p.base, frac_d(tau(j, p.chart, p.base)(p.theta))};
}

BundlePoint canonical(const CircleCocycle& tau, const BundlePoint& p) {
  return to_chart(tau, p, tau.cover.canonical(p.base));
}

BundlePoint nil_to_bundle(const Cover& cover, const HeisD& g) {
  const HeisD r = reduce_numeric(g);
  const Eigen::Vector2d base{r.x, r.y};
  const int i = cover.canonical(base);
  const Eigen::Vector2d l = cover.local(i, base);
  // (x, y, z) * (a, b, 0) = (x + a, y + b, z + x b).
  const double b = std::round(l.y() - r.y);
  return {i, base, frac_d(2.0 * (r.z + r.x * b))};
}

HeisD bundle_to_nil(const Cover& cover, const BundlePoint& p) {
  const Eigen::Vector2d l = cover.local(p.chart, p.base);
  return reduce_numeric(HeisD{l.x(), l.y(), 0.5 * p.theta});
}

FiberIdentification twist_identification(const Cover& source, const Cover& target, const DisplacementField& h,
                                          int k) {
  return [source, target, h, k](int i, int kappa, const Eigen::Vector2d& x) {
    const Eigen::Vector2d u = h(x);
    const Eigen::Vector2d li = source.local(i, x);
    const Eigen::Vector2d lk = target.local(kappa, wrap(x + u));
    const double n = std::round(lk.y() - li.y() - u.y());
    return CircleDiffeo::rotation(k * (u.x() * li.y() + (li.x() + u.x()) * n));
  };
}

LiftedConjugacy lift_conjugacy(const DisplacementField& h, const CircleCocycle& tau_m, const CircleCocycle& tau_mhat,
                               const FiberIdentification& psi, int samples) {
  if (!psi) throw Error(ErrorCode::NotCohomologous, "no fiber identification supplied");
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::Vector2d x = random_point(rng);
    const Eigen::Vector2d hx = h.apply(x);
    const auto src = tau_m.cover.charts_containing(x);
    const auto dst = tau_mhat.cover.charts_containing(hx);
    for (int i : src) {
      for (int kappa : dst) {
        const CircleDiffeo p_ik = psi(i, kappa, x);
        for (int j : src) {
          const CircleDiffeo lhs = p_ik.compose(tau_m(i, j, x)), rhs = psi(j, kappa, x);
          for (double t : theta_samples()) worst = std::max(worst, circle_distance(lhs(t), rhs(t)));
        }
        for (int kappa2 : dst) {
          const CircleDiffeo lhs = tau_mhat(kappa2, kappa, hx).compose(p_ik), rhs = psi(i, kappa2, x);
          for (double t : theta_samples()) worst = std::max(worst, circle_distance(lhs(t), rhs(t)));
        }
      }
    }
  }
  if (!(worst < 1e-9)) {
    std::ostringstream os;
    os << "fiber identification is not compatible with the cocycles (residual " << worst << ")";
    throw Error(ErrorCode::NotCohomologous, os.str());
  }
  LiftedConjugacy out;
  out.consistency = worst;
  const Cover target = tau_mhat.cover;
  out.map = [h, psi, target](const BundlePoint& p) {
    const Eigen::Vector2d hx = h.apply(p.base);
    const int kappa = target.canonical(hx);
    return BundlePoint{kappa, hx, frac_d(psi(p.chart, kappa, p.base)(p.theta))};
  };
  return out;
}

BundlePoint SmoothModel::operator()(const BundlePoint& p) const {
  const Eigen::Vector2d y = wrap(A.cast<double>() * p.base);
  const int kappa = tau.cover.canonical(y);
  return {kappa, y, frac_d(p.theta + rho(p.chart, kappa, p.base))};
}

double SmoothModel::fiber_derivative(const BundlePoint&) const { return 1.0; }

SmoothModel build_smooth_model(const IntMatrix2& A, const CircleCocycle& tau_rot, const SmoothModelOptions& options) {
  if (!is_hyperbolic_2x2(A)) throw Error(ErrorCode::NotHyperbolic, "base matrix is not hyperbolic");
  const long long det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  const Cover& cover = tau_rot.cover;
  const int e = euler_number(tau_rot);
  if (e != 0 && det != 1) {
    throw Error(ErrorCode::InconsistentRotationField, "orientation-reversing base with nonzero Euler number");
  }

  const CircleCocycle twist = twist_cocycle(cover, e);
  std::function<double(int, const Eigen::Vector2d&)> beta = [](int, const Eigen::Vector2d&) { return 0.0; };
  if (!(tau_rot.kind == twist.kind && (tau_rot.kind == "identity" || e != 0) &&
        cocycle_distance(tau_rot, twist, 64) == 0.0)) {
    const RotationCoboundary rc = rotation_coboundary(tau_rot, twist, options.samples);
    if (!(rc.residual < 1e-8)) {
      std::ostringstream os;
      os << "rotation cocycle differs from the twist-" << e << " cocycle by a nontrivial class (residual "
         << rc.residual << ")";
      throw Error(ErrorCode::InconsistentRotationField, os.str());
    }
    beta = rc.b;
  }

  const double a = double(A(0, 0)), b = double(A(0, 1)), c = double(A(1, 0)), d = double(A(1, 1));
  auto twist_rho = [=](int r2, int s2) {
    return [=](int i, int kappa, const Eigen::Vector2d& x) {
      const Eigen::Vector2d l = cover.local(i, x);
      const double X = a * l.x() + b * l.y(), Y = c * l.x() + d * l.y();
      const Eigen::Vector2d lk = cover.local(kappa, wrap(Eigen::Vector2d(X, Y)));
      const double n = std::round(lk.y() - Y);
      const double Q = 0.5 * a * c * l.x() * l.x() + 0.5 * b * d * l.y() * l.y() + b * c * l.x() * l.y() +
                       0.5 * r2 * l.x() + 0.5 * s2 * l.y();
      return e * (Q + X * n);
    };
  };

  auto consistency = [&](const std::function<double(int, int, const Eigen::Vector2d&)>& rho,
                         const CircleCocycle& tau) {
    std::mt19937_64 rng(43);
    double worst = 0.0;
    for (int s = 0; s < options.samples; ++s) {
      const Eigen::Vector2d x = random_point(rng);
      const Eigen::Vector2d y = wrap(A.cast<double>() * x);
      const auto src = cover.charts_containing(x), dst = cover.charts_containing(y);
      for (int i : src) {
        for (int kappa : dst) {
          const double r = rho(i, kappa, x);
          for (int j : src) {
            worst = std::max(worst, circle_distance(rho(j, kappa, x), r + tau(i, j, x).rotation_part()));
          }
          for (int kappa2 : dst) {
            worst = std::max(worst, circle_distance(rho(i, kappa2, x), r + tau(kappa2, kappa, y).rotation_part()));
          }
        }
      }
    }
    return worst;
  };

  SmoothModel model;
  model.A = A;
  model.tau = tau_rot;
  model.twist = e;
  bool found = false;
  for (int r2 = 0; r2 < 2 && !found; ++r2) {
    for (int s2 = 0; s2 < 2 && !found; ++s2) {
      if (consistency(twist_rho(r2, s2), twist) < 1e-9) {
        model.r2 = r2;
        model.s2 = s2;
        found = true;
      }
    }
  }
  if (!found) throw Error(ErrorCode::InconsistentRotationField, "no lattice-consistent rotation field");

  const auto base_rho = twist_rho(model.r2, model.s2);
  const double constant = options.constant_rotation;
  const FourierSeries modes = options.fiber_modes;
  const double eps = options.fiber_eps;
  const Eigen::Matrix2d Ad = A.cast<double>();
  model.rho = [=](int i, int kappa, const Eigen::Vector2d& x) {
    double r = base_rho(i, kappa, x) + beta(kappa, wrap(Ad * x)) - beta(i, x) + constant;
    if (eps != 0.0) r += eps * modes.value(x);
    return r;
  };
  model.consistency = consistency(model.rho, tau_rot);
  if (!(model.consistency < 1e-8)) {
    std::ostringstream os;
    os << "rotation field inconsistent with the cocycle (residual " << model.consistency << ")";
    throw Error(ErrorCode::InconsistentRotationField, os.str());
  }
  return model;
}

BundleMap fibered_bundle_map(const FiberedMapSpec& f, const Cover& cover) {
  return [f, cover](const BundlePoint& p) { return nil_to_bundle(cover, evaluate_lift(f, bundle_to_nil(cover, p))); };
}

LeafConjugacyReport leaf_conjugacy_check(const BundleMap& hhat, const BundleMap& fhat, const SmoothModel& g,
                                         const Cover& source, int samples, unsigned long long seed) {
  LeafConjugacyReport r;
  r.samples = samples;
  std::mt19937_64 rng(seed);
  const Eigen::Matrix2d A = g.A.cast<double>();
  for (int s = 0; s < samples; ++s) {
    const Eigen::Vector2d x = random_point(rng);
    const int i = source.canonical(x);
    const BundlePoint p{i, x, theta_samples()[std::size_t(s) % theta_samples().size()]};
    const BundlePoint hp = hhat(p);
    for (double t : theta_samples()) {
      r.fiber_residual = std::max(r.fiber_residual, torus_distance(hhat({i, x, t}).base, hp.base));
    }
    const Eigen::Vector2d target = wrap(A * hp.base);
    r.leaf_residual = std::max(r.leaf_residual, torus_distance(hhat(fhat(p)).base, target));
    r.model_residual = std::max(r.model_residual, torus_distance(g(hp).base, hhat(fhat(p)).base));
  }
  return r;
}

}  // namespace nilmodel
