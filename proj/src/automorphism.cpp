#include "nilmodel/automorphism.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "nilmodel/errors.hpp"

namespace nilmodel {

long long determinant(const IntMatrix& m) {
  // Bareiss fraction-free elimination; exact for integer input.
  const Eigen::Index n = m.rows();
  if (n == 0) return 1;
  IntMatrix a = m;
  long long sign = 1;
  long long prev = 1;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    if (a(k, k) == 0) {
      Eigen::Index swap = k + 1;
      while (swap < n && a(swap, k) == 0) ++swap;
      if (swap == n) return 0;
      a.row(k).swap(a.row(swap));
      sign = -sign;
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      for (Eigen::Index j = k + 1; j < n; ++j) {
        a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
      }
    }
    prev = a(k, k);
  }
  return sign * a(n - 1, n - 1);
}

IntMatrix matrix_power(const IntMatrix& m, int k) {
  IntMatrix result = IntMatrix::Identity(m.rows(), m.cols());
  IntMatrix base = m;
  while (k > 0) {
    if (k & 1) result = result * base;
    base = base * base;
    k >>= 1;
  }
  return result;
}

namespace {

void append_term(std::ostringstream& os, bool& first, const Rational& c, const std::string& t) {
  if (c == 0) return;
  const Rational ac = abs(c);
  if (c < 0) os << "-";
  else if (!first) os << "+";
  first = false;
  const mpz_class& p = ac.get_num();
  const mpz_class& q = ac.get_den();
  if (p != 1) os << p.get_str();
  os << t;
  if (q != 1) os << "/" << q.get_str();
}

std::vector<HeisQ> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> num(-20, 20);
  std::uniform_int_distribution<long> den(1, 12);
  std::vector<HeisQ> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({make_rational(num(rng), den(rng)), make_rational(num(rng), den(rng)),
                   make_rational(num(rng), den(rng))});
  }
  return pts;
}

}  // namespace

std::string ZPolynomial::to_string() const {
  std::ostringstream os;
  bool first = true;
  append_term(os, first, zz, "z");
  append_term(os, first, xx, "x^2");
  append_term(os, first, yy, "y^2");
  append_term(os, first, xy, "xy");
  append_term(os, first, x1, "x");
  append_term(os, first, y1, "y");
  if (first) os << "0";
  return os.str();
}

HeisAutomorphism make_automorphism(const IntMatrix2& M, long r2, long s2) {
  const long long a = M(0, 0), b = M(0, 1), c = M(1, 0), d = M(1, 1);
  ZPolynomial poly;
  poly.zz = Rational(static_cast<long>(a * d - b * c));
  poly.xx = make_rational(a * c, 2);
  poly.yy = make_rational(b * d, 2);
  poly.xy = Rational(static_cast<long>(b * c));
  poly.x1 = make_rational(r2, 2);
  poly.y1 = make_rational(s2, 2);
  return make_automorphism(M, poly);
}

HeisAutomorphism make_automorphism(const IntMatrix2& M, const ZPolynomial& poly) {
  const long long det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  if (det != 1 && det != -1) {
    throw Error(ErrorCode::NotUnimodular, "det M = " + std::to_string(det));
  }
  HeisAutomorphism phi{M, poly};

  const auto pts = random_points(32, 0x5eed1234ULL);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const HeisQ lhs = apply(phi, pts[i]) * apply(phi, pts[i + 1]);
    const HeisQ rhs = apply(phi, pts[i] * pts[i + 1]);
    if (lhs != rhs) {
      throw Error(ErrorCode::HomomorphismViolation,
                  "phi(g)phi(h) != phi(gh) for z-polynomial " + poly.to_string());
    }
  }
  const HeisQ generators[] = {{1, 0, 0}, {0, 1, 0}, {0, 0, make_rational(1, 2)}};
  for (const auto& g : generators) {
    if (!in_lattice(apply(phi, g))) {
      throw Error(ErrorCode::LatticeNotPreserved,
                  "generator image leaves Gamma for z-polynomial " + poly.to_string());
    }
  }
  return phi;
}

HeisAutomorphism f0() {
  IntMatrix2 M;
  M << 2, 1, 1, 1;
  return make_automorphism(M, 0, 0);
}

HeisQ apply(const HeisAutomorphism& phi, const HeisQ& g) {
  const auto& M = phi.M;
  const auto& p = phi.poly;
  HeisQ out;
  out.x = Rational(static_cast<long>(M(0, 0))) * g.x + Rational(static_cast<long>(M(0, 1))) * g.y;
  out.y = Rational(static_cast<long>(M(1, 0))) * g.x + Rational(static_cast<long>(M(1, 1))) * g.y;
  out.z = p.zz * g.z + p.xx * g.x * g.x + p.yy * g.y * g.y + p.xy * g.x * g.y + p.x1 * g.x +
          p.y1 * g.y;
  return out;
}

HeisD apply(const HeisAutomorphism& phi, const HeisD& g) {
  const auto& M = phi.M;
  const auto& p = phi.poly;
  return {double(M(0, 0)) * g.x + double(M(0, 1)) * g.y,
          double(M(1, 0)) * g.x + double(M(1, 1)) * g.y,
          p.zz.get_d() * g.z + p.xx.get_d() * g.x * g.x + p.yy.get_d() * g.y * g.y +
              p.xy.get_d() * g.x * g.y + p.x1.get_d() * g.x + p.y1.get_d() * g.y};
}

NilPoint apply(const HeisAutomorphism& phi, const NilPoint& p) {
  return to_nil(apply(phi, p.rep()));
}

HeisAutomorphism compose(const HeisAutomorphism& phi, const HeisAutomorphism& psi) {
  const IntMatrix2 M = phi.M * psi.M;
  HeisAutomorphism base = make_automorphism(M, 0, 0);
  // Linear coefficients are read off the images of (1,0,0) and (0,1,0).
  const HeisQ ex = apply(phi, apply(psi, HeisQ{1, 0, 0}));
  const HeisQ ey = apply(phi, apply(psi, HeisQ{0, 1, 0}));
  ZPolynomial poly = base.poly;
  poly.x1 = ex.z - poly.xx;
  poly.y1 = ey.z - poly.yy;
  return make_automorphism(M, poly);
}

IntMatrix2 abelianization(const HeisAutomorphism& phi) { return phi.M; }

Eigen::Matrix3d lie_derivative(const HeisAutomorphism& phi) {
  Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
  D(0, 0) = double(phi.M(0, 0));
  D(0, 1) = double(phi.M(0, 1));
  D(1, 0) = double(phi.M(1, 0));
  D(1, 1) = double(phi.M(1, 1));
  D(2, 0) = phi.poly.x1.get_d();
  D(2, 1) = phi.poly.y1.get_d();
  D(2, 2) = phi.poly.zz.get_d();
  return D;
}

bool is_hyperbolic_2x2(const IntMatrix2& M) {
  const long long det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  const long long tr = M(0, 0) + M(1, 1);
  if (det == 1) return tr >= 3 || tr <= -3;
  if (det == -1) return tr != 0;
  return false;
}

Eigen::MatrixXd HyperbolicityCertificate::eigenbasis() const {
  Eigen::MatrixXd P(matrix.rows(), unstable_basis.cols() + stable_basis.cols());
  P << unstable_basis, stable_basis;
  return P;
}

namespace {

Eigen::VectorXd normalized_sign(Eigen::VectorXd v) {
  v.normalize();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0) v = -v;
      break;
    }
  }
  return v;
}

}  // namespace

HyperbolicityCertificate hyperbolicity_certificate(const IntMatrix& M) {
  if (M.rows() != M.cols()) throw Error(ErrorCode::InvalidConfig, "matrix must be square");
  HyperbolicityCertificate cert;
  cert.matrix = M;
  const Eigen::Index n = M.rows();
  const Eigen::MatrixXd Md = M.cast<double>();

  struct Mode {
    std::complex<double> value;
    Eigen::VectorXd re;
    Eigen::VectorXd im;  // empty for real eigenvalues
  };
  std::vector<Mode> modes;

  const double tr = Md.trace();
  const double disc = n == 2 ? tr * tr - 4.0 * Md.determinant() : -1.0;
  if (n == 2 && disc >= 0.0) {
    // Closed form; the larger root first, the smaller from the product to
    // avoid cancellation.
    const double sq = std::sqrt(disc);
    const double l1 = tr >= 0 ? 0.5 * (tr + sq) : 0.5 * (tr - sq);
    const double det = Md.determinant();
    const double l2 = l1 != 0.0 ? det / l1 : 0.5 * (tr - sq);
    for (double l : {l1, l2}) {
      Eigen::VectorXd v(2);
      if (std::abs(Md(0, 1)) > 0.0) v << Md(0, 1), l - Md(0, 0);
      else if (std::abs(Md(1, 0)) > 0.0) v << l - Md(1, 1), Md(1, 0);
      else v << (std::abs(l - Md(0, 0)) < 1e-12 ? 1.0 : 0.0), (std::abs(l - Md(0, 0)) < 1e-12 ? 0.0 : 1.0);
      modes.push_back({l, normalized_sign(v), {}});
    }
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> es(Md);
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto l = vals(i);
      if (std::abs(l.imag()) < 1e-14) {
        modes.push_back({{l.real(), 0.0}, normalized_sign(vecs.col(i).real()), {}});
      } else if (l.imag() > 0) {
        Eigen::VectorXd re = vecs.col(i).real();
        Eigen::VectorXd im = vecs.col(i).imag();
        modes.push_back({l, re.normalized(), im.normalized()});
        modes.push_back({std::conj(l), {}, {}});
      }
    }
  }

  cert.gap = std::numeric_limits<double>::infinity();
  cert.lambda = std::numeric_limits<double>::infinity();
  cert.lambda_s = 0.0;
  std::vector<Eigen::VectorXd> unstable, stable;
  for (const auto& m : modes) {
    cert.eigenvalues.push_back(m.value);
    const double r = std::abs(m.value);
    cert.gap = std::min(cert.gap, std::abs(r - 1.0));
    auto& target = r > 1.0 ? unstable : stable;
    if (r > 1.0) cert.lambda = std::min(cert.lambda, r);
    else cert.lambda_s = std::max(cert.lambda_s, r);
    if (m.re.size() > 0) target.push_back(m.re);
    if (m.im.size() > 0) target.push_back(m.im);
  }
  std::sort(cert.eigenvalues.begin(), cert.eigenvalues.end(),
            [](auto a, auto b) { return std::abs(a) > std::abs(b); });

  cert.unstable_basis.resize(n, static_cast<Eigen::Index>(unstable.size()));
  for (std::size_t i = 0; i < unstable.size(); ++i) cert.unstable_basis.col(i) = unstable[i];
  cert.stable_basis.resize(n, static_cast<Eigen::Index>(stable.size()));
  for (std::size_t i = 0; i < stable.size(); ++i) cert.stable_basis.col(i) = stable[i];

  const long long det = determinant(M);
  if (n == 2 && (det == 1 || det == -1)) {
    cert.exact_witness = true;
    cert.hyperbolic = is_hyperbolic_2x2(M.topLeftCorner<2, 2>());
  } else {
    cert.hyperbolic = cert.gap > kHyperbolicityTolerance;
  }
  if (!cert.hyperbolic) cert.lambda = 1.0;
  return cert;
}

HyperbolicityCertificate certify_hyperbolic(const IntMatrix& M) {
  const long long det = determinant(M);
  if (det != 1 && det != -1) throw Error(ErrorCode::NotUnimodular, "det = " + std::to_string(det));
  auto cert = hyperbolicity_certificate(M);
  if (!cert.hyperbolic) {
    std::ostringstream os;
    os << "eigenvalue modulus gap " << cert.gap << " below " << kHyperbolicityTolerance;
    throw Error(ErrorCode::NotCertified, os.str());
  }
  return cert;
}

}  // namespace nilmodel
