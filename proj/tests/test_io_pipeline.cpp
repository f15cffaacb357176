#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "nilmodel/errors.hpp"
#include "nilmodel/pipeline.hpp"

using namespace nilmodel;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(NILMODEL_SOURCE_DIR) / "configs";

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nilmodel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

RunConfig small_f0() {
  RunConfig c = load_config(kConfigs / "f0.json");
  c.conjugacy.n = 64;
  return c;
}

}  // namespace

TEST_CASE("scalar and group elements round-trip through json") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<long long> num(-50, 50), den(1, 20);
  for (int i = 0; i < 100; ++i) {
    const Rational q = make_rational(num(rng), den(rng));
    CHECK(rational_from_json(rational_json(q)) == q);
    const NilPoint p = to_nil({q, make_rational(num(rng), den(rng)), make_rational(num(rng), den(rng))});
    CHECK(nil_point_from_json(nil_point_json(p)) == p);
  }
  CHECK(rational_from_json(Json(3)) == 3);
  CHECK(rational_from_json(Json("0.125")) == make_rational(1, 8));
  IntMatrix M(2, 3);
  M << 1, -2, 3, 4, 5, -6;
  CHECK(int_matrix_from_json(int_matrix_json(M)) == M);
}

TEST_CASE("automorphisms and fibered maps round-trip through json") {
  const HeisAutomorphism phi = make_automorphism((IntMatrix2() << 3, 2, 1, 1).finished(), 1, -1);
  const HeisAutomorphism back = automorphism_from_json(automorphism_json(phi));
  CHECK(back.M == phi.M);
  CHECK(back.poly == phi.poly);

  Json explicit_poly = {{"M", {{2, 1}, {1, 1}}}, {"poly", {{"zz", "1"}, {"xx", "1"}, {"yy", "1/2"}, {"xy", "1"}, {"x1", 0}, {"y1", 0}}}};
  CHECK(automorphism_from_json(explicit_poly).poly == f0().poly);
  Json missing = explicit_poly;
  missing["poly"].erase("y1");
  CHECK_THROWS_AS(automorphism_from_json(missing), Error);
  explicit_poly["poly"]["xx"] = "2";
  CHECK_THROWS_AS(automorphism_from_json(explicit_poly), Error);

  const RunConfig golden = load_config(kConfigs / "golden.json");
  const FiberedMapSpec again = fibered_map_from_json(fibered_map_json(golden.map));
  CHECK(fibered_map_json(again) == fibered_map_json(golden.map));
  const HeisD g{0.3, 0.7, 0.1};
  const HeisD a = evaluate_lift(golden.map, g), b = evaluate_lift(again, g);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.z == b.z);
}

TEST_CASE("configs round-trip and the golden config is well formed") {
  for (const auto& entry : std::filesystem::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    const RunConfig c = load_config(entry.path());
    CHECK(config_json(config_from_json(config_json(c))) == config_json(c));
  }
  const RunConfig golden = load_config(kConfigs / "golden.json");
  CHECK(golden.map.has_perturbation());
  CHECK(std::abs(golden.map.base_eps) <= 0.05);
  CHECK(std::abs(golden.map.fiber_eps) <= 0.05);
  CHECK(golden.bundle.cocycle.twist == 2);
}

TEST_CASE("malformed inputs are reported with error codes") {
  const auto dir = scratch_dir("bad");
  std::ofstream(dir / "broken.json") << "{ not json";
  try {
    load_config(dir / "broken.json");
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  try {
    read_json(dir / "missing.json");
    FAIL("expected IOError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IOError);
  }
  Json bad = config_json(small_f0());
  bad["map"]["core"]["M"] = {{2, 0}, {0, 1}};
  CHECK_THROWS_AS(config_from_json(bad), Error);
}

TEST_CASE("planted cocycle spec is in the twist class") {
  const RunConfig golden = load_config(kConfigs / "golden.json");
  const CocycleSpec spec = cocycle_from_json(cocycle_json(golden.bundle.cocycle));
  CHECK(cocycle_json(spec) == cocycle_json(golden.bundle.cocycle));
  const CircleCocycle planted = spec.planted();
  CHECK(check_cocycle(planted, 300).max() < 1e-10);
  CHECK(cocycle_distance(planted, spec.base(), 300) > 1e-3);
  CHECK(euler_number(reduce_to_rotations(planted, 300).rotations) == spec.twist);
}

TEST_CASE("csv writers and number formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  const auto dir = scratch_dir("csv");
  CsvTable t;
  t.header = {"a", "b"};
  t.add({1.0, 0.5});
  t.add_raw({"x", "y"});
  write_csv(dir / "t.csv", t);
  const auto lines = read_lines(dir / "t.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "a,b");
  CHECK(lines[2] == "x,y");

  write_displacement_csv(dir / "u.csv", DisplacementField::identity(8));
  CHECK(read_lines(dir / "u.csv").size() == 1 + 64);
  write_section_csv(dir / "s.csv", SectionField(4, 0.25));
  CHECK(read_lines(dir / "s.csv").size() == 1 + 16);

  const Json j = {{"k", 1}, {"v", "1/3"}};
  write_json(dir / "j.json", j);
  CHECK(read_json(dir / "j.json") == j);
}

TEST_CASE("empty reports write no plot data") {
  const auto dir = scratch_dir("empty");
  RunReport empty;
  CHECK(emit_plot_data(empty, dir) == 0);
  CHECK(std::filesystem::is_empty(dir));
}

TEST_CASE("periodic stage reports the Lucas counts and writes them as csv") {
  RunConfig c = small_f0();
  c.command = "periodic";
  c.out_dir = scratch_dir("periodic");
  const RunReport report = run_command(c);
  REQUIRE(report.stages.size() == 1);
  CHECK(report.stages[0].ok());
  CHECK(report.all_pass());
  CHECK(std::filesystem::exists(c.out_dir / "report.json"));
  const auto lines = read_lines(c.out_dir / "periodic_counts.csv");
  REQUIRE(lines.size() >= 5);
  CHECK(lines[0] == "m,count,lefschetz");
  CHECK(lines[1].rfind("1,1,", 0) == 0);
  CHECK(lines[2].rfind("2,5,", 0) == 0);
  CHECK(lines[3].rfind("3,16,", 0) == 0);
  CHECK(lines[4].rfind("4,45,", 0) == 0);
  const Json saved = read_json(c.out_dir / "report.json");
  CHECK(saved.dump() == report.to_json().dump());
}

TEST_CASE("a parabolic core stops the pipeline at certification") {
  RunConfig c = load_config(kConfigs / "parabolic.json");
  c.out_dir = scratch_dir("parabolic");
  const RunReport report = run_command(c);
  REQUIRE(report.stages.size() == 1);
  CHECK(report.stages[0].stage == "certify");
  CHECK(report.stages[0].error_code == "NotCertified");
  CHECK_FALSE(report.all_pass());
}

TEST_CASE("unknown commands are rejected") {
  RunConfig c = small_f0();
  c.command = "everything";
  c.out_dir = scratch_dir("unknown");
  try {
    run_command(c);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
}
