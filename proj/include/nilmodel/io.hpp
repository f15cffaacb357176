#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "nilmodel/automorphism.hpp"
#include "nilmodel/bundle.hpp"
#include "nilmodel/conjugacy.hpp"
#include "nilmodel/fibered.hpp"
#include "nilmodel/graph_transform.hpp"
#include "nilmodel/heis.hpp"
#include "nilmodel/lefschetz.hpp"
#include "nilmodel/rational.hpp"

namespace nilmodel {

using Json = nlohmann::ordered_json;

/// Rationals travel as "p/q" strings; integers and decimal strings are
/// accepted on input.
Json rational_json(const Rational& q);
Rational rational_from_json(const Json& j);

Json nil_point_json(const NilPoint& p);   // {"x":"1/2","y":"0/1","z":"1/8"}
NilPoint nil_point_from_json(const Json& j);

Json int_matrix_json(const IntMatrix& m);
IntMatrix int_matrix_from_json(const Json& j);

/// {"M":[[2,1],[1,1]],"r2":0,"s2":0}, or {"M":…,"poly":{"zz":"1","xx":…}}.
Json automorphism_json(const HeisAutomorphism& phi);
HeisAutomorphism automorphism_from_json(const Json& j);

/// [{"k":[1,0],"cos":0,"sin":0.159}, …]
Json fourier_json(const FourierSeries& s);
FourierSeries fourier_from_json(const Json& j);

/// {"core":…,"base_eps":0.05,"base_modes":[[…],[…]],"fiber_eps":0.1,"fiber_modes":[…]}.
/// Validated through make_fibered_map.
Json fibered_map_json(const FiberedMapSpec& f);
FiberedMapSpec fibered_map_from_json(const Json& j);

/// Planted circle cocycle: the twist-k cocycle on the standard cover,
/// conjugated by per-chart diffeomorphisms
///   t_i(x)(t) = t + m(x) (rotation_i + sum_h c_h cos 2 pi k_h t + s_h sin 2 pi k_h t),
///   m(x) = 1 + amplitude sin(2 pi (kx x + ky y)).
struct ChartWiggle {
  int chart = 0;
  double rotation = 0.0;
  std::vector<CircleDiffeo::Harmonic> harmonics;
};

struct CocycleSpec {
  int twist = 2;
  Rational margin = make_rational(1, 8);
  std::vector<ChartWiggle> wiggles;
  int modulation_kx = 1, modulation_ky = 0;
  double modulation_amplitude = 0.5;

  Cover cover() const;
  CircleCocycle base() const;  // twist-k, rotation-valued
  Coboundary coboundary() const;
  CircleCocycle planted() const;
};

Json cocycle_json(const CocycleSpec& c);
CocycleSpec cocycle_from_json(const Json& j);

Json lefschetz_json(const LefschetzReport& r);

/// Header of a displacement export: {N, linear, tol, defect}.
Json displacement_header_json(const DisplacementField& h, const IntMatrix2& A, double tol, double defect);

/// Rows (i, j, u1, u2) in row-major order.
void write_displacement_csv(const std::filesystem::path& path, const DisplacementField& h);
void write_section_csv(const std::filesystem::path& path, const SectionField& sigma);

/// Minimal CSV table; numbers are written with 17 significant digits.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(const std::vector<double>& row);
  void add_raw(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace nilmodel
