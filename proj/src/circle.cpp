#include "nilmodel/circle.hpp"

#include <cmath>
#include <numbers>
#include <variant>

#include "nilmodel/errors.hpp"

namespace nilmodel {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

struct CircleDiffeo::Node {
  struct Basic {
    double rotation = 0.0;
    std::vector<Harmonic> wiggle;
  };
  struct Compose {
    CircleDiffeo outer, inner;
  };
  struct Inverse {
    CircleDiffeo of;
  };
  struct Blend {
    std::vector<double> weights;
    std::vector<CircleDiffeo> maps;
    std::vector<double> offsets;
    double shift = 0.0;
  };
  std::variant<Basic, Compose, Inverse, Blend> data;
};

CircleDiffeo::CircleDiffeo() : node_(std::make_shared<const Node>(Node{Node::Basic{}})) {}

CircleDiffeo CircleDiffeo::rotation(double amount) {
  return CircleDiffeo(std::make_shared<const Node>(Node{Node::Basic{amount, {}}}));
}

CircleDiffeo CircleDiffeo::basic(double rotation, std::vector<Harmonic> wiggle) {
  double lip = 0.0;
  for (const auto& h : wiggle) {
    if (h.k < 1) throw Error(ErrorCode::InvalidConfig, "wiggle harmonics start at k = 1");
    lip += kTwoPi * h.k * (std::abs(h.c) + std::abs(h.s));
  }
  if (lip >= 1.0) throw Error(ErrorCode::InvalidConfig, "wiggle too large: sup|w'| may reach 1");
  return CircleDiffeo(std::make_shared<const Node>(Node{Node::Basic{rotation, std::move(wiggle)}}));
}

CircleDiffeo CircleDiffeo::blend(const std::vector<std::pair<double, CircleDiffeo>>& terms, double shift) {
  Node::Blend b;
  double total = 0.0;
  for (const auto& [w, f] : terms) {
    if (w < 0.0) throw Error(ErrorCode::InvalidConfig, "negative blend weight");
    if (w == 0.0) continue;
    b.weights.push_back(w);
    b.maps.push_back(f);
    b.offsets.push_back(f(0.0));
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::InvalidConfig, "blend weights must sum to 1");
  b.shift = shift;
  return CircleDiffeo(std::make_shared<const Node>(Node{std::move(b)}));
}

CircleDiffeo CircleDiffeo::compose(const CircleDiffeo& other) const {
  return CircleDiffeo(std::make_shared<const Node>(Node{Node::Compose{*this, other}}));
}

CircleDiffeo CircleDiffeo::inverse() const {
  if (const auto* inv = std::get_if<Node::Inverse>(&node_->data)) return inv->of;
  return CircleDiffeo(std::make_shared<const Node>(Node{Node::Inverse{*this}}));
}

double CircleDiffeo::operator()(double t) const {
  struct Eval {
    double t;
    double operator()(const Node::Basic& b) const {
      double v = t + b.rotation;
      for (const auto& h : b.wiggle) v += h.c * std::cos(kTwoPi * h.k * t) + h.s * std::sin(kTwoPi * h.k * t);
      return v;
    }
    double operator()(const Node::Compose& c) const { return c.outer(c.inner(t)); }
    double operator()(const Node::Blend& b) const {
      double v = b.shift;
      for (std::size_t k = 0; k < b.maps.size(); ++k) v += b.weights[k] * (b.maps[k](t) - b.offsets[k]);
      return v;
    }
    double operator()(const Node::Inverse& inv) const {
      // F(x) - x has oscillation below 1, so the root lies within 1 of
      // t - (F(t) - t). Newton with a bisection fallback.
      const CircleDiffeo& F = inv.of;
      double x = 2.0 * t - F(t);
      double lo = x - 1.0, hi = x + 1.0;
      for (int it = 0; it < 100; ++it) {
        const double r = F(x) - t;
        if (r == 0.0) return x;
        if (r > 0.0) hi = x; else lo = x;
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(t))) break;
        const double step = r / F.derivative(x);
        double next = x - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-16 * std::max(1.0, std::abs(x))) return next;
        x = next;
      }
      return x;
    }
  };
  return std::visit(Eval{t}, node_->data);
}

double CircleDiffeo::derivative(double t) const {
  struct Eval {
    double t;
    double operator()(const Node::Basic& b) const {
      double v = 1.0;
      for (const auto& h : b.wiggle) {
        v += kTwoPi * h.k * (-h.c * std::sin(kTwoPi * h.k * t) + h.s * std::cos(kTwoPi * h.k * t));
      }
      return v;
    }
    double operator()(const Node::Compose& c) const { return c.outer.derivative(c.inner(t)) * c.inner.derivative(t); }
    double operator()(const Node::Blend& b) const {
      double v = 0.0;
      for (std::size_t k = 0; k < b.maps.size(); ++k) v += b.weights[k] * b.maps[k].derivative(t);
      return v;
    }
    double operator()(const Node::Inverse& inv) const {
      const CircleDiffeo& F = inv.of;
      return 1.0 / F.derivative(CircleDiffeo(std::make_shared<const Node>(Node{inv}))(t));
    }
  };
  return std::visit(Eval{t}, node_->data);
}

std::optional<double> CircleDiffeo::as_rotation() const {
  struct Eval {
    std::optional<double> operator()(const Node::Basic& b) const {
      if (!b.wiggle.empty()) return std::nullopt;
      return b.rotation;
    }
    std::optional<double> operator()(const Node::Compose& c) const {
      const auto a = c.outer.as_rotation(), b = c.inner.as_rotation();
      if (a && b) return *a + *b;
      return std::nullopt;
    }
    std::optional<double> operator()(const Node::Inverse& inv) const {
      if (const auto a = inv.of.as_rotation()) return -*a;
      return std::nullopt;
    }
    std::optional<double> operator()(const Node::Blend& b) const {
      for (const auto& m : b.maps) {
        if (!m.as_rotation()) return std::nullopt;
      }
      return b.shift;
    }
  };
  return std::visit(Eval{}, node_->data);
}

double CircleDiffeo::rotation_part() const {
  if (const auto r = as_rotation()) return *r;
  constexpr int kSamples = 64;
  double acc = 0.0;
  for (int k = 0; k < kSamples; ++k) {
    const double t = double(k) / kSamples;
    acc += (*this)(t) - t;
  }
  return acc / kSamples;
}

double CircleDiffeo::wiggle_norm() const {
  if (as_rotation()) return 0.0;
  const double rot = rotation_part();
  double m = 0.0;
  for (int k = 0; k < 64; ++k) {
    const double t = k / 64.0;
    m = std::max(m, std::abs((*this)(t) - t - rot));
  }
  return m;
}

double circle_distance(double a, double b) {
  const double d = a - b;
  return std::abs(d - std::round(d));
}

}  // namespace nilmodel
