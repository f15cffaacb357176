#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nilmodel/conjugacy.hpp"
#include "nilmodel/fibered.hpp"
#include "nilmodel/io.hpp"

namespace nilmodel {

struct CertifyParams {
  int grid_n = 16;
  double aperture_deg = 20.0;
  int integrity_samples = 10000;
};

struct ConjugacyParams {
  int n = 256;
  double tol = 1e-13;
  int max_iterations = 400;
  int refine_depth = 16;
  int injectivity_samples = 10000;
};

struct PeriodicParams {
  int count_m = 8;
  int refine_m = 4;
};

struct ShadowParams {
  double delta = 1e-4;
  int length = 10000;
  int seeds = 10;
  int expansivity_pairs = 2000;
  std::vector<int> horizons{10, 20, 60};
  int intersection_pairs = 4;
};

struct GraphParams {
  int n = 128;
  double tol = 1e-14;
  double shear_eps = 0.05;
  double connection_correction = 0.1;
  int oracle_steps = 50;
  int lipschitz_pairs = 20;
};

struct BundleParams {
  CocycleSpec cocycle;
  int samples = 2000;
  int leaf_samples = 2000;
  int exact_samples = 500;
};

struct RunConfig {
  std::string command = "pipeline";
  FiberedMapSpec map;
  std::vector<FiberedMapSpec> ph_maps;  // further maps for the base and PH checks
  CertifyParams certify;
  ConjugacyParams conjugacy;
  PeriodicParams periodic;
  ShadowParams shadow;
  GraphParams graph;
  BundleParams bundle;
  unsigned long long seed = 1;
  int workers = 0;  // 0: OpenMP default
  std::filesystem::path out_dir = "out";
};

RunConfig config_from_json(const Json& j);
Json config_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

struct Check {
  int criterion = 0;
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string limit;
};

struct StageResult {
  std::string stage;
  Json data = Json::object();
  std::vector<Check> checks;
  std::map<int, double> criterion_seconds;
  double seconds = 0.0;
  std::string error;       // what() of a hard error, empty otherwise
  std::string error_code;

  bool ok() const;
};

struct PlotData {
  std::vector<double> conjugacy_changes;
  std::vector<double> graph_changes;
  struct Scatter {
    double delta, epsilon;
    unsigned long long seed;
  };
  std::vector<Scatter> shadow;
  struct Count {
    int m;
    long long count, lefschetz;
  };
  std::vector<Count> counts;

  bool empty() const { return conjugacy_changes.empty() && graph_changes.empty() && shadow.empty() && counts.empty(); }
};

/// Intermediate results shared between stages.
struct PipelineState {
  std::optional<HyperbolicityCertificate> cert;
  std::optional<DisplacementField> h;
  PlotData plot;
  bool write_artifacts = false;
};

StageResult stage_certify(const RunConfig& c, PipelineState& s);         // criteria 1, 2, 9
StageResult stage_conjugacy(const RunConfig& c, PipelineState& s);       // 4
StageResult stage_bundle(const RunConfig& c, PipelineState& s);          // 8
StageResult stage_periodic(const RunConfig& c, PipelineState& s);        // 3, 5
StageResult stage_shadow(const RunConfig& c, PipelineState& s);          // 6
StageResult stage_graph_transform(const RunConfig& c, PipelineState& s); // 7

struct RunReport {
  RunConfig config;
  std::vector<StageResult> stages;
  PlotData plot;

  bool all_pass() const;
  Json to_json() const;
};

/// Runs the stages behind c.command ("pipeline" runs all of them: certify,
/// conjugacy, bundle, then the periodic, shadowing and graph-transform
/// verifications), stopping at the first hard error. Writes report.json and
/// per-stage artifacts into c.out_dir.
RunReport run_command(const RunConfig& c);
RunReport run_pipeline(RunConfig c);

/// Convergence curves, shadowing scatter and periodic counts as CSV.
/// Returns the number of files written (0 with a warning on stderr for an
/// empty report).
int emit_plot_data(const RunReport& report, const std::filesystem::path& dir);

}  // namespace nilmodel
