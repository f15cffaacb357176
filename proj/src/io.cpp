#include "nilmodel/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "nilmodel/errors.hpp"

namespace nilmodel {

namespace {

Json::const_reference require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string("missing key '") + key + "'");
  return j.at(key);
}

template <typename T>
T value_or(const Json& j, const char* key, T fallback) {
  return j.is_object() && j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json rational_json(const Rational& q) { return to_string(q); }

Rational rational_from_json(const Json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return make_rational(j.get<long long>());
  throw Error(ErrorCode::InvalidConfig, "rationals must be \"p/q\" strings or integers");
}

Json nil_point_json(const NilPoint& p) {
  return {{"x", rational_json(p.rep().x)}, {"y", rational_json(p.rep().y)}, {"z", rational_json(p.rep().z)}};
}

NilPoint nil_point_from_json(const Json& j) {
  return to_nil(HeisQ{rational_from_json(require(j, "x")), rational_from_json(require(j, "y")),
                      rational_from_json(require(j, "z"))});
}

Json int_matrix_json(const IntMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

IntMatrix int_matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw Error(ErrorCode::InvalidConfig, "matrix must be [[…],…]");
  IntMatrix m(Eigen::Index(j.size()), Eigen::Index(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw Error(ErrorCode::InvalidConfig, "ragged matrix");
    for (std::size_t k = 0; k < j[i].size(); ++k) m(Eigen::Index(i), Eigen::Index(k)) = j[i][k].get<long long>();
  }
  return m;
}

Json automorphism_json(const HeisAutomorphism& phi) {
  Json j;
  j["M"] = int_matrix_json(IntMatrix(phi.M));
  const Rational r2 = 2 * phi.poly.x1, s2 = 2 * phi.poly.y1;
  if (r2.get_den() == 1 && s2.get_den() == 1) {
    j["r2"] = r2.get_num().get_si();
    j["s2"] = s2.get_num().get_si();
  }
  j["poly"] = {{"zz", rational_json(phi.poly.zz)}, {"xx", rational_json(phi.poly.xx)},
               {"yy", rational_json(phi.poly.yy)}, {"xy", rational_json(phi.poly.xy)},
               {"x1", rational_json(phi.poly.x1)}, {"y1", rational_json(phi.poly.y1)}};
  j["formula"] = phi.poly.to_string();
  return j;
}

HeisAutomorphism automorphism_from_json(const Json& j) {
  const IntMatrix M = int_matrix_from_json(require(j, "M"));
  if (M.rows() != 2 || M.cols() != 2) throw Error(ErrorCode::InvalidConfig, "core matrix must be 2x2");
  const IntMatrix2 M2 = M;
  if (j.contains("poly")) {
    const Json& p = j.at("poly");
    ZPolynomial poly;
    poly.zz = rational_from_json(require(p, "zz"));
    poly.xx = rational_from_json(require(p, "xx"));
    poly.yy = rational_from_json(require(p, "yy"));
    poly.xy = rational_from_json(require(p, "xy"));
    poly.x1 = rational_from_json(require(p, "x1"));
    poly.y1 = rational_from_json(require(p, "y1"));
    return make_automorphism(M2, poly);
  }
  return make_automorphism(M2, value_or<long>(j, "r2", 0), value_or<long>(j, "s2", 0));
}

Json fourier_json(const FourierSeries& s) {
  Json modes = Json::array();
  for (const auto& m : s.modes) modes.push_back({{"k", {m.kx, m.ky}}, {"cos", m.cos}, {"sin", m.sin}});
  return modes;
}

FourierSeries fourier_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, "Fourier modes must be a list");
  FourierSeries s;
  for (const auto& m : j) {
    const Json& k = require(m, "k");
    if (!k.is_array() || k.size() != 2) throw Error(ErrorCode::InvalidConfig, "mode index must be [kx, ky]");
    FourierMode mode{k[0].get<int>(), k[1].get<int>(), value_or(m, "cos", 0.0), value_or(m, "sin", 0.0)};
    if (std::abs(mode.kx) > FourierSeries::kMaxDegree || std::abs(mode.ky) > FourierSeries::kMaxDegree) {
      throw Error(ErrorCode::InvalidConfig, "Fourier degree above 4");
    }
    s.modes.push_back(mode);
  }
  return s;
}

Json fibered_map_json(const FiberedMapSpec& f) {
  return {{"core", automorphism_json(f.core)},
          {"base_eps", f.base_eps},
          {"base_modes", {fourier_json(f.base_modes[0]), fourier_json(f.base_modes[1])}},
          {"fiber_eps", f.fiber_eps},
          {"fiber_modes", fourier_json(f.fiber_modes)}};
}

FiberedMapSpec fibered_map_from_json(const Json& j) {
  FiberedMapSpec f;
  f.core = automorphism_from_json(require(j, "core"));
  f.base_eps = value_or(j, "base_eps", 0.0);
  if (j.contains("base_modes")) {
    const Json& b = j.at("base_modes");
    if (!b.is_array() || b.size() != 2) throw Error(ErrorCode::InvalidConfig, "base_modes must hold two series");
    f.base_modes = {fourier_from_json(b[0]), fourier_from_json(b[1])};
  }
  f.fiber_eps = value_or(j, "fiber_eps", 0.0);
  if (j.contains("fiber_modes")) f.fiber_modes = fourier_from_json(j.at("fiber_modes"));
  return make_fibered_map(std::move(f));
}

Cover CocycleSpec::cover() const { return Cover::standard(margin); }

CircleCocycle CocycleSpec::base() const { return twist_cocycle(cover(), twist); }

Coboundary CocycleSpec::coboundary() const {
  std::vector<ChartWiggle> per_chart(std::size_t(cover().size()));
  for (std::size_t i = 0; i < per_chart.size(); ++i) per_chart[i].chart = int(i);
  for (const auto& w : wiggles) {
    if (w.chart < 0 || w.chart >= int(per_chart.size())) throw Error(ErrorCode::InvalidConfig, "wiggle chart out of range");
    per_chart[std::size_t(w.chart)] = w;
  }
  const int kx = modulation_kx, ky = modulation_ky;
  const double amp = modulation_amplitude;
  // Validate once at the largest modulation.
  for (const auto& w : per_chart) {
    auto h = w.harmonics;
    for (auto& m : h) {
      m.c *= 1.0 + std::abs(amp);
      m.s *= 1.0 + std::abs(amp);
    }
    (void)CircleDiffeo::basic(w.rotation, h);
  }
  return [per_chart, kx, ky, amp](int i, const Eigen::Vector2d& x) {
    const double m = 1.0 + amp * std::sin(2.0 * std::numbers::pi * (kx * x.x() + ky * x.y()));
    const ChartWiggle& w = per_chart[std::size_t(i)];
    auto h = w.harmonics;
    for (auto& hm : h) {
      hm.c *= m;
      hm.s *= m;
    }
    return CircleDiffeo::basic(m * w.rotation, std::move(h));
  };
}

CircleCocycle CocycleSpec::planted() const { return apply_coboundary(base(), coboundary()); }

Json cocycle_json(const CocycleSpec& c) {
  Json w = Json::array();
  for (const auto& x : c.wiggles) {
    Json h = Json::array();
    for (const auto& m : x.harmonics) h.push_back({{"k", m.k}, {"cos", m.c}, {"sin", m.s}});
    w.push_back({{"chart", x.chart}, {"rotation", x.rotation}, {"harmonics", h}});
  }
  return {{"twist", c.twist},
          {"margin", rational_json(c.margin)},
          {"modulation", {{"k", {c.modulation_kx, c.modulation_ky}}, {"amplitude", c.modulation_amplitude}}},
          {"wiggles", w}};
}

CocycleSpec cocycle_from_json(const Json& j) {
  CocycleSpec c;
  c.twist = value_or(j, "twist", 2);
  if (j.contains("margin")) c.margin = rational_from_json(j.at("margin"));
  if (j.contains("modulation")) {
    const Json& m = j.at("modulation");
    if (m.contains("k")) {
      c.modulation_kx = m.at("k").at(0).get<int>();
      c.modulation_ky = m.at("k").at(1).get<int>();
    }
    c.modulation_amplitude = value_or(m, "amplitude", c.modulation_amplitude);
  }
  if (j.contains("wiggles")) {
    for (const auto& w : j.at("wiggles")) {
      ChartWiggle cw;
      cw.chart = require(w, "chart").get<int>();
      cw.rotation = value_or(w, "rotation", 0.0);
      if (w.contains("harmonics")) {
        for (const auto& h : w.at("harmonics")) {
          cw.harmonics.push_back({require(h, "k").get<int>(), value_or(h, "cos", 0.0), value_or(h, "sin", 0.0)});
        }
      }
      c.wiggles.push_back(std::move(cw));
    }
  }
  if (c.margin <= 0 || c.margin >= make_rational(1, 2)) throw Error(ErrorCode::InvalidConfig, "cover margin must lie in (0, 1/2)");
  (void)c.coboundary();
  return c;
}

Json lefschetz_json(const LefschetzReport& r) {
  Json pts = Json::array();
  for (const auto& p : r.fixed_points) pts.push_back({rational_json(p.u), rational_json(p.v)});
  return {{"m", r.m}, {"lefschetz", r.lefschetz}, {"count", r.count}, {"eigen_product", r.eigen_product},
          {"points", pts}};
}

Json displacement_header_json(const DisplacementField& h, const IntMatrix2& A, double tol, double defect) {
  return {{"N", h.size()}, {"linear", int_matrix_json(IntMatrix(A))}, {"tol", tol}, {"defect", defect}};
}

void write_displacement_csv(const std::filesystem::path& path, const DisplacementField& h) {
  CsvTable t;
  t.header = {"i", "j", "u1", "u2"};
  const auto& g = h.grid();
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      const Eigen::Vector2d u = g.at(i, j);
      t.add({double(i), double(j), u.x(), u.y()});
    }
  }
  write_csv(path, t);
}

void write_section_csv(const std::filesystem::path& path, const SectionField& sigma) {
  CsvTable t;
  t.header = {"i", "j", "sigma"};
  for (int i = 0; i < sigma.size(); ++i) {
    for (int j = 0; j < sigma.size(); ++j) t.add({double(i), double(j), sigma.values.at(i, j)});
  }
  write_csv(path, t);
}

void CsvTable::add(const std::vector<double>& row) {
  std::vector<std::string> r;
  r.reserve(row.size());
  for (double v : row) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
      r.push_back(std::to_string(static_cast<long long>(v)));
    } else {
      r.push_back(format_double(v));
    }
  }
  rows.push_back(std::move(r));
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IOError, "cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  if (!out) throw Error(ErrorCode::IOError, "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IOError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IOError, "write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

}  // namespace nilmodel
