#include "nilmodel/pipeline.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

#include "nilmodel/bundle.hpp"
#include "nilmodel/errors.hpp"
#include "nilmodel/graph_transform.hpp"
#include "nilmodel/lefschetz.hpp"
#include "nilmodel/shadowing.hpp"

namespace nilmodel {

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.is_object() && j.contains(key)) out = j.at(key).get<T>();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void check(StageResult& r, int criterion, std::string name, bool pass, double value, std::string limit) {
  r.checks.push_back({criterion, std::move(name), pass, value, std::move(limit)});
}

void runtime_check(StageResult& r, int criterion, double limit) {
  const double t = r.criterion_seconds[criterion];
  check(r, criterion, "runtime_s", t < limit, t, "< " + format_double(limit));
}

/// Runs body, turning library errors into a stage-level error record.
template <typename Body>
StageResult run_stage(const std::string& name, Body body) {
  StageResult r;
  r.stage = name;
  Stopwatch sw;
  try {
    body(r);
  } catch (const Error& e) {
    r.error = e.what();
    r.error_code = std::string(to_string(e.code()));
  } catch (const std::exception& e) {
    r.error = e.what();
    r.error_code = "Internal";
  }
  r.seconds = sw.seconds();
  return r;
}

const HyperbolicityCertificate& base_certificate(const RunConfig& c, PipelineState& s) {
  if (!s.cert) s.cert = certify_hyperbolic(IntMatrix(abelianization(c.map.core)));
  return *s.cert;
}

/// h for the configured base map, solved once per run.
const DisplacementField& conjugacy(const RunConfig& c, PipelineState& s, ConjugacyReport* report = nullptr) {
  if (!s.h) {
    const auto& cert = base_certificate(c, s);
    ConjugacyOptions o;
    o.max_iterations = c.conjugacy.max_iterations;
    o.refine_depth = c.conjugacy.refine_depth;
    o.injectivity_samples = c.conjugacy.injectivity_samples;
    auto [h, rep] = solve_semiconjugacy(induced_base_map(c.map), abelianization(c.map.core), cert, c.conjugacy.n,
                                        c.conjugacy.tol, o);
    s.h = std::move(h);
    s.plot.conjugacy_changes = rep.change_history;
    if (report) *report = rep;
  }
  return *s.h;
}

std::filesystem::path artifact(const RunConfig& c, const std::string& name) { return c.out_dir / name; }

Rational random_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<long long> num(-200, 200), den(1, 64);
  return make_rational(num(rng), den(rng));
}

}  // namespace

bool StageResult::ok() const {
  if (!error.empty()) return false;
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  RunConfig c;
  read_if(j, "command", c.command);
  if (!j.contains("map")) throw Error(ErrorCode::InvalidConfig, "config needs a 'map'");
  c.map = fibered_map_from_json(j.at("map"));
  if (j.contains("ph_maps")) {
    for (const auto& m : j.at("ph_maps")) c.ph_maps.push_back(fibered_map_from_json(m));
  }
  if (j.contains("certify")) {
    const Json& x = j.at("certify");
    read_if(x, "grid_n", c.certify.grid_n);
    read_if(x, "aperture_deg", c.certify.aperture_deg);
    read_if(x, "integrity_samples", c.certify.integrity_samples);
  }
  if (j.contains("conjugacy")) {
    const Json& x = j.at("conjugacy");
    read_if(x, "N", c.conjugacy.n);
    read_if(x, "tol", c.conjugacy.tol);
    read_if(x, "max_iterations", c.conjugacy.max_iterations);
    read_if(x, "refine_depth", c.conjugacy.refine_depth);
    read_if(x, "injectivity_samples", c.conjugacy.injectivity_samples);
  }
  if (j.contains("periodic")) {
    read_if(j.at("periodic"), "count_m", c.periodic.count_m);
    read_if(j.at("periodic"), "refine_m", c.periodic.refine_m);
  }
  if (j.contains("shadow")) {
    const Json& x = j.at("shadow");
    read_if(x, "delta", c.shadow.delta);
    read_if(x, "length", c.shadow.length);
    read_if(x, "seeds", c.shadow.seeds);
    read_if(x, "expansivity_pairs", c.shadow.expansivity_pairs);
    read_if(x, "horizons", c.shadow.horizons);
    read_if(x, "intersection_pairs", c.shadow.intersection_pairs);
  }
  if (j.contains("graph_transform")) {
    const Json& x = j.at("graph_transform");
    read_if(x, "N", c.graph.n);
    read_if(x, "tol", c.graph.tol);
    read_if(x, "shear_eps", c.graph.shear_eps);
    read_if(x, "connection_correction", c.graph.connection_correction);
    read_if(x, "oracle_steps", c.graph.oracle_steps);
    read_if(x, "lipschitz_pairs", c.graph.lipschitz_pairs);
  }
  if (j.contains("bundle")) {
    const Json& x = j.at("bundle");
    if (x.contains("cocycle")) c.bundle.cocycle = cocycle_from_json(x.at("cocycle"));
    read_if(x, "samples", c.bundle.samples);
    read_if(x, "leaf_samples", c.bundle.leaf_samples);
    read_if(x, "exact_samples", c.bundle.exact_samples);
  }
  read_if(j, "seed", c.seed);
  read_if(j, "workers", c.workers);
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();

  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be positive");
  };
  positive(c.conjugacy.tol, "conjugacy.tol");
  positive(c.graph.tol, "graph_transform.tol");
  positive(c.shadow.delta, "shadow.delta");
  positive(c.certify.aperture_deg, "certify.aperture_deg");
  if (c.periodic.count_m < 1 || c.periodic.refine_m < 1) throw Error(ErrorCode::InvalidConfig, "periodic ranges start at m = 1");
  if (c.shadow.seeds < 1 || c.shadow.length < 2) throw Error(ErrorCode::InvalidConfig, "shadowing needs seeds and length");
  return c;
}

Json config_json(const RunConfig& c) {
  Json ph = Json::array();
  for (const auto& m : c.ph_maps) ph.push_back(fibered_map_json(m));
  return {{"command", c.command},
          {"seed", c.seed},
          {"workers", c.workers},
          {"out", c.out_dir.string()},
          {"map", fibered_map_json(c.map)},
          {"ph_maps", ph},
          {"certify",
           {{"grid_n", c.certify.grid_n},
            {"aperture_deg", c.certify.aperture_deg},
            {"integrity_samples", c.certify.integrity_samples}}},
          {"conjugacy",
           {{"N", c.conjugacy.n},
            {"tol", c.conjugacy.tol},
            {"max_iterations", c.conjugacy.max_iterations},
            {"refine_depth", c.conjugacy.refine_depth},
            {"injectivity_samples", c.conjugacy.injectivity_samples}}},
          {"periodic", {{"count_m", c.periodic.count_m}, {"refine_m", c.periodic.refine_m}}},
          {"shadow",
           {{"delta", c.shadow.delta},
            {"length", c.shadow.length},
            {"seeds", c.shadow.seeds},
            {"expansivity_pairs", c.shadow.expansivity_pairs},
            {"horizons", c.shadow.horizons},
            {"intersection_pairs", c.shadow.intersection_pairs}}},
          {"graph_transform",
           {{"N", c.graph.n},
            {"tol", c.graph.tol},
            {"shear_eps", c.graph.shear_eps},
            {"connection_correction", c.graph.connection_correction},
            {"oracle_steps", c.graph.oracle_steps},
            {"lipschitz_pairs", c.graph.lipschitz_pairs}}},
          {"bundle",
           {{"cocycle", cocycle_json(c.bundle.cocycle)},
            {"samples", c.bundle.samples},
            {"leaf_samples", c.bundle.leaf_samples},
            {"exact_samples", c.bundle.exact_samples}}}};
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

StageResult stage_certify(const RunConfig& c, PipelineState& s) {
  return run_stage("certify", [&](StageResult& r) {
    // f0 integrity: formula, Gamma-preservation and equivariance, exactly.
    Stopwatch sw1;
    const IntMatrix2 A0 = (IntMatrix2() << 2, 1, 1, 1).finished();
    const HeisAutomorphism phi = make_automorphism(A0, 0, 0);
    const std::string formula = phi.poly.to_string();
    check(r, 1, "f0_formula", formula == "z+x^2+y^2/2+xy", 0.0, "z+x^2+y^2/2+xy");
    std::mt19937_64 rng(c.seed);
    std::uniform_int_distribution<long> lat(-5, 5);
    int lattice_failures = 0, equivariance_failures = 0;
    for (int k = 0; k < c.certify.integrity_samples; ++k) {
      const HeisQ g{random_rational(rng), random_rational(rng), random_rational(rng)};
      const LatticeElement gamma{lat(rng), lat(rng), lat(rng)};
      const HeisQ pg = apply(phi, gamma.point());
      if (!in_lattice(pg)) ++lattice_failures;
      if (apply(phi, g * gamma.point()) != apply(phi, g) * pg) ++equivariance_failures;
      if (!(to_nil(apply(phi, g * gamma.point())) == to_nil(apply(phi, g)))) ++equivariance_failures;
    }
    check(r, 1, "gamma_preservation_failures", lattice_failures == 0, lattice_failures, "== 0");
    check(r, 1, "equivariance_failures", equivariance_failures == 0, equivariance_failures, "== 0");
    r.criterion_seconds[1] = sw1.seconds();
    runtime_check(r, 1, 5.0);
    r.data["f0"] = automorphism_json(phi);
    r.data["integrity_samples"] = c.certify.integrity_samples;

    // Base maps.
    Stopwatch sw2;
    FiberedMapSpec f0_spec;
    f0_spec.core = phi;
    f0_spec = make_fibered_map(f0_spec);
    const TorusMap b0 = induced_base_map(f0_spec);
    check(r, 2, "f0_base_linear", b0.is_linear() && b0.linear() == A0, 0.0, "(2x+y, x+y)");
    std::vector<FiberedMapSpec> maps{c.map};
    maps.insert(maps.end(), c.ph_maps.begin(), c.ph_maps.end());
    Json bases = Json::array();
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const IntMatrix2 expected = abelianization(maps[k].core);
      const IntMatrix2 got = induced_matrix(induced_base_map(maps[k]));
      check(r, 2, "induced_matrix_map" + std::to_string(k), got == expected, 0.0, "== abelianization");
      bases.push_back({{"induced", int_matrix_json(IntMatrix(got))}, {"base_eps", maps[k].base_eps}});
    }
    r.criterion_seconds[2] = sw2.seconds();
    r.data["base_maps"] = bases;

    // Base certificate for the configured map; parabolic cores stop here.
    const auto& cert = base_certificate(c, s);
    r.data["certificate"] = {{"lambda", cert.lambda},
                             {"lambda_s", cert.lambda_s},
                             {"gap", cert.gap},
                             {"exact_witness", cert.exact_witness}};

    // Partial hyperbolicity: f0, the configured map, extra maps; the identity must fail.
    Stopwatch sw9;
    const double aperture = c.certify.aperture_deg * std::numbers::pi / 180.0;
    Json ph = Json::array();
    std::vector<FiberedMapSpec> ph_maps{f0_spec};
    ph_maps.insert(ph_maps.end(), maps.begin(), maps.end());
    for (std::size_t k = 0; k < ph_maps.size(); ++k) {
      const auto cert_k = certify_hyperbolic(IntMatrix(abelianization(ph_maps[k].core)));
      const PHReport rep =
          verify_partial_hyperbolicity(ph_maps[k], ConeParams::from_certificate(cert_k, aperture), c.certify.grid_n);
      const std::string name = k == 0 ? "ph_f0" : "ph_map" + std::to_string(k - 1);
      check(r, 9, name, rep.pass && rep.worst_margin() > 0, rep.worst_margin(), "pass, margin > 0");
      ph.push_back({{"name", name},
                    {"min_unstable_expansion", rep.min_unstable_expansion},
                    {"max_stable_contraction", rep.max_stable_contraction},
                    {"center_rate", {rep.min_center_rate, rep.max_center_rate}},
                    {"worst_margin", rep.worst_margin()},
                    {"pass", rep.pass}});
    }
    FiberedMapSpec id_spec;
    id_spec.core = make_automorphism(IntMatrix2::Identity(), 0, 0);
    id_spec = make_fibered_map(id_spec);
    const PHReport id_rep = verify_partial_hyperbolicity(id_spec, ConeParams{}, c.certify.grid_n);
    check(r, 9, "ph_identity_rejected", !id_rep.pass, id_rep.worst_margin(), "fails");
    r.criterion_seconds[9] = sw9.seconds();
    r.data["partial_hyperbolicity"] = ph;
  });
}

StageResult stage_conjugacy(const RunConfig& c, PipelineState& s) {
  return run_stage("conjugacy", [&](StageResult& r) {
    Stopwatch sw;
    ConjugacyReport rep;
    s.h.reset();
    const DisplacementField& h = conjugacy(c, s, &rep);
    const IntMatrix2 A = abelianization(c.map.core);
    // A linear base converges in one step and has no measurable rate.
    if (!induced_base_map(c.map).is_linear()) {
      check(r, 4, "rate_vs_expected", std::abs(rep.rate - rep.expected_rate) <= 0.05, rep.rate,
            "within 0.05 of " + format_double(rep.expected_rate));
    }
    check(r, 4, "defect_4N", rep.defect < 1e-8, rep.defect, "< 1e-8");
    check(r, 4, "injectivity_margin", rep.injectivity_margin > 0, rep.injectivity_margin, "> 0");

    // The unperturbed base solves to u = 0 exactly.
    auto [h0, rep0] = solve_semiconjugacy(TorusMap(A), A, base_certificate(c, s), c.conjugacy.n, c.conjugacy.tol);
    check(r, 4, "linear_u_zero", h0.sup_norm() == 0.0, h0.sup_norm(), "== 0");
    r.criterion_seconds[4] = sw.seconds();
    runtime_check(r, 4, 60.0);

    r.data = {{"N", rep.n},
              {"iterations", rep.iterations},
              {"rate_emp", rep.rate},
              {"expected_rate", rep.expected_rate},
              {"final_change", rep.final_change},
              {"defect", rep.defect},
              {"interpolated_defect", rep.interpolated_defect},
              {"injectivity_margin", rep.injectivity_margin},
              {"sup_u", rep.sup_u},
              {"u_at_origin", {h(Eigen::Vector2d::Zero()).x(), h(Eigen::Vector2d::Zero()).y()}},
              {"linear_iterations", rep0.iterations}};
    if (s.write_artifacts) {
      write_displacement_csv(artifact(c, "displacement.csv"), h);
      write_json(artifact(c, "displacement.json"), displacement_header_json(h, A, c.conjugacy.tol, rep.defect));
    }
  });
}

StageResult stage_bundle(const RunConfig& c, PipelineState& s) {
  return run_stage("bundle", [&](StageResult& r) {
    Stopwatch sw;
    const CocycleSpec& spec = c.bundle.cocycle;
    const Cover cover = spec.cover();
    const int samples = c.bundle.samples;
    const IntMatrix2 A = abelianization(c.map.core);

    // Exact residuals of rotation cocycles at rational points.
    const Rational exact_twist = check_cocycle_exact(spec.base(), c.bundle.exact_samples, c.seed);
    const Rational exact_one = check_cocycle_exact(twist_cocycle(cover, 1), c.bundle.exact_samples, c.seed + 1);
    check(r, 8, "exact_cocycle_residual", exact_twist == 0 && exact_one == 0, exact_twist.get_d(), "== 0");

    // Planted cocycle: coboundary round trip and reduction to rotations.
    const CircleCocycle planted = spec.planted();
    const Coboundary t = spec.coboundary();
    const CocycleCheck planted_check = check_cocycle(planted, samples, c.seed);
    const double round_trip =
        cocycle_distance(apply_coboundary(planted, inverse_coboundary(t)), spec.base(), samples, c.seed);
    check(r, 8, "coboundary_round_trip", round_trip < 1e-10, round_trip, "< 1e-10");
    const Reduction red = reduce_to_rotations(planted, samples);
    const RotationCoboundary recovered = rotation_coboundary(red.rotations, spec.base(), samples, c.seed);
    const int e_base = euler_number(spec.base()), e_reduced = euler_number(red.rotations);
    check(r, 8, "reduction_residual", red.residual < 1e-8, red.residual, "< 1e-8");
    check(r, 8, "reduction_recovers_planted", recovered.residual < 1e-8, recovered.residual, "< 1e-8");
    check(r, 8, "reduction_euler_preserved", e_base == e_reduced && e_base == spec.twist, e_reduced,
          "== " + std::to_string(spec.twist));

    // The five steps: certify A, solve h, cocycle of M^, lift h~, build g.
    Json steps = Json::array();
    Stopwatch step;
    const auto& cert = base_certificate(c, s);
    steps.push_back({{"step", "certify_base"}, {"seconds", step.seconds()}, {"lambda", cert.lambda}});
    step = Stopwatch();
    const DisplacementField& h = conjugacy(c, s);
    steps.push_back({{"step", "solve_h"}, {"seconds", step.seconds()}, {"sup_u", h.sup_norm()}});

    step = Stopwatch();
    const CircleCocycle tau_m = twist_cocycle(cover, 2);  // H/Gamma over T^2
    const CircleCocycle tau_mhat = twist_cocycle(cover, 2);
    const CircleCocycle pulled = pullback_cocycle(tau_mhat, h);
    const int e_m = euler_number(tau_m), e_pulled = euler_number(pulled);
    check(r, 8, "pullback_euler_preserved", e_m == e_pulled, e_pulled, "== " + std::to_string(e_m));
    steps.push_back({{"step", "cocycle_mhat"},
                     {"seconds", step.seconds()},
                     {"euler_m", e_m},
                     {"euler_pullback", e_pulled},
                     {"pullback_charts", pulled.cover.size()}});

    step = Stopwatch();
    const LiftedConjugacy lift =
        lift_conjugacy(h, tau_m, tau_mhat, twist_identification(cover, cover, h, 2), samples);
    double projection = 0.0;
    {
      std::mt19937_64 rng(c.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int k = 0; k < samples; ++k) {
        const Eigen::Vector2d x(unit(rng), unit(rng));
        const BundlePoint p{cover.canonical(x), x, unit(rng)};
        projection = std::max(projection, torus_distance(lift.map(p).base, h.apply(x)));
      }
    }
    check(r, 8, "lift_projection", projection <= 1e-9, projection, "<= 1e-9");
    check(r, 8, "lift_consistency", lift.consistency <= 1e-9, lift.consistency, "<= 1e-9");
    steps.push_back({{"step", "lift_h"}, {"seconds", step.seconds()}, {"consistency", lift.consistency}});

    step = Stopwatch();
    const SmoothModel g = build_smooth_model(A, tau_mhat);
    const LeafConjugacyReport leaf =
        leaf_conjugacy_check(lift.map, fibered_bundle_map(c.map, cover), g, cover, c.bundle.leaf_samples, c.seed);
    check(r, 8, "leaf_conjugacy", leaf.max() < 1e-8, leaf.max(), "< 1e-8");
    steps.push_back({{"step", "smooth_model_and_leaves"},
                     {"seconds", step.seconds()},
                     {"twist", g.twist},
                     {"r2", g.r2},
                     {"s2", g.s2},
                     {"model_consistency", g.consistency},
                     {"fiber_residual", leaf.fiber_residual},
                     {"leaf_residual", leaf.leaf_residual},
                     {"model_residual", leaf.model_residual}});

    // Trivial bundle: the model is (x, t) -> (Ax, t) on the nose.
    const SmoothModel trivial = build_smooth_model(A, identity_cocycle(cover));
    int trivial_mismatch = 0;
    {
      std::mt19937_64 rng(c.seed + 2);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const Eigen::Matrix2d Ad = A.cast<double>();
      for (int k = 0; k < samples; ++k) {
        const Eigen::Vector2d x(unit(rng), unit(rng));
        const BundlePoint p{cover.canonical(x), x, unit(rng)};
        const BundlePoint q = trivial(p);
        if (q.theta != p.theta || q.base != wrap(Ad * x)) ++trivial_mismatch;
      }
    }
    check(r, 8, "trivial_bundle_model_exact", trivial_mismatch == 0, trivial_mismatch, "== 0 mismatches");
    r.criterion_seconds[8] = sw.seconds();
    runtime_check(r, 8, 120.0);

    r.data = {{"cocycle", cocycle_json(spec)},
              {"euler_number", e_base},
              {"planted_check", {{"cocycle", planted_check.cocycle}, {"identity", planted_check.identity},
                                 {"inverse", planted_check.inverse}}},
              {"round_trip", round_trip},
              {"reduction_residual", red.residual},
              {"reduced_euler_number", e_reduced},
              {"recovery_residual", recovered.residual},
              {"steps", steps}};
    if (s.write_artifacts) write_json(artifact(c, "cocycle.json"), r.data);
  });
}

StageResult stage_periodic(const RunConfig& c, PipelineState& s) {
  return run_stage("periodic", [&](StageResult& r) {
    const IntMatrix2 A = abelianization(c.map.core);
    const long long tr = A.trace(), det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    Stopwatch sw3;
    Json counts = Json::array();
    long long t_prev = 2, t = tr, det_m = det;  // t_m = tr A^m by the trace recursion
    s.plot.counts.clear();
    for (int m = 1; m <= c.periodic.count_m; ++m) {
      const LefschetzReport rep = lefschetz_report(IntMatrix(A), m);
      const long long from_trace = std::llabs(1 - t + det_m);
      check(r, 3, "count_eq_lefschetz_m" + std::to_string(m), rep.count == std::llabs(rep.lefschetz), double(rep.count),
            "== |det(I - A^m)|");
      check(r, 3, "count_eq_eigen_product_m" + std::to_string(m), std::llround(rep.eigen_product) == rep.count,
            rep.eigen_product, "round == count");
      check(r, 3, "count_eq_trace_recursion_m" + std::to_string(m), from_trace == rep.count, double(from_trace),
            "== count");
      counts.push_back(lefschetz_json(rep));
      s.plot.counts.push_back({m, rep.count, rep.lefschetz});
      const long long next = tr * t - det * t_prev;
      t_prev = t;
      t = next;
      det_m *= det;
    }
    r.criterion_seconds[3] = sw3.seconds();
    runtime_check(r, 3, 1.0);

    const DisplacementField& h = conjugacy(c, s);
    Stopwatch sw5;
    const TorusMap f = induced_base_map(c.map);
    Json refined = Json::array();
    for (int m = 1; m <= c.periodic.refine_m; ++m) {
      try {
        const PeriodicRefinement p = refine_periodic_points(f, A, h, m);
        check(r, 5, "refined_count_m" + std::to_string(m), (long long)p.points.size() == p.expected,
              double(p.points.size()), "== " + std::to_string(p.expected));
        check(r, 5, "refined_residual_m" + std::to_string(m), p.max_residual < 1e-12, p.max_residual, "< 1e-12");
        Json pts = Json::array();
        for (const auto& x : p.points) pts.push_back({x.x(), x.y()});
        refined.push_back({{"m", m},
                           {"expected", p.expected},
                           {"count", p.points.size()},
                           {"max_residual", p.max_residual},
                           {"lost_seeds", p.lost_seeds},
                           {"points", pts}});
      } catch (const Error& e) {
        check(r, 5, "refined_m" + std::to_string(m), false, 0.0, e.what());
      }
    }
    r.criterion_seconds[5] = sw5.seconds();
    runtime_check(r, 5, 60.0);
    r.data = {{"linear", counts}, {"refined", refined}};
    if (s.write_artifacts) write_json(artifact(c, "periodic.json"), r.data);
  });
}

StageResult stage_shadow(const RunConfig& c, PipelineState& s) {
  return run_stage("shadow", [&](StageResult& r) {
    const IntMatrix2 A = abelianization(c.map.core);
    const auto& cert = base_certificate(c, s);
    const TorusMap linear(A);
    const ShadowParams& p = c.shadow;
    Stopwatch sw;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto start_point = [&](int k) {
      std::mt19937_64 rng(c.seed * 7919 + unsigned(k));
      return Eigen::Vector2d(unit(rng), unit(rng));
    };
    s.plot.shadow.clear();
    double worst_ratio = 0.0, sum_full = 0.0, sum_half = 0.0;
    Json runs = Json::array();
    for (int k = 0; k < p.seeds; ++k) {
      const unsigned long long seed = c.seed * 1000 + unsigned(k);
      const PseudoOrbit po = generate_pseudo_orbit(linear, start_point(k), p.length, p.delta, seed);
      const ShadowingResult res = shadow(linear, cert, po);
      const PseudoOrbit half = generate_pseudo_orbit(linear, start_point(k), p.length, 0.5 * p.delta, seed);
      const ShadowingResult res_half = shadow(linear, cert, half);
      worst_ratio = std::max(worst_ratio, res.epsilon / p.delta);
      sum_full += res.epsilon;
      sum_half += res_half.epsilon;
      s.plot.shadow.push_back({p.delta, res.epsilon, seed});
      s.plot.shadow.push_back({0.5 * p.delta, res_half.epsilon, seed});
      runs.push_back({{"seed", seed}, {"epsilon", res.epsilon}, {"epsilon_half_delta", res_half.epsilon},
                      {"residual", res.residual}, {"passes", res.passes}});
      if (k == 0 && s.write_artifacts) {
        CsvTable t;
        t.header = {"i", "x", "y"};
        for (std::size_t i = 0; i < po.points.size(); ++i) t.add({double(i), po.points[i].x(), po.points[i].y()});
        write_csv(artifact(c, "pseudo_orbit.csv"), t);
      }
    }
    check(r, 6, "epsilon_over_delta", worst_ratio <= 3.0, worst_ratio, "<= 3");
    const double scaling = sum_full / sum_half;
    check(r, 6, "delta_scaling", std::abs(scaling / 2.0 - 1.0) <= 0.1, scaling, "2 within 10%");
    const PseudoOrbit exact = generate_pseudo_orbit(linear, start_point(0), p.length, 0.0, c.seed);
    const ShadowingResult exact_res = shadow(linear, cert, exact);
    check(r, 6, "exact_orbit_epsilon", exact_res.epsilon == 0.0, exact_res.epsilon, "== 0");
    r.criterion_seconds[6] = sw.seconds();
    runtime_check(r, 6, 30.0);
    r.data["linear"] = {{"delta", p.delta}, {"length", p.length}, {"max_epsilon_over_delta", worst_ratio},
                        {"halving_ratio", scaling}, {"runs", runs}};

    // The configured (possibly perturbed) base map: data only.
    const TorusMap f = induced_base_map(c.map);
    if (!f.is_linear()) {
      double ratio = 0.0;
      int passes = 0;
      for (int k = 0; k < std::min(p.seeds, 3); ++k) {
        const PseudoOrbit po = generate_pseudo_orbit(f, start_point(k), p.length, p.delta, c.seed * 1000 + unsigned(k));
        const ShadowingResult res = shadow(f, cert, po);
        ratio = std::max(ratio, res.epsilon / p.delta);
        passes = std::max(passes, res.passes);
      }
      r.data["perturbed"] = {{"max_epsilon_over_delta", ratio}, {"max_passes", passes}};
    }
    Json expansivity = Json::array();
    for (int horizon : p.horizons) {
      ExpansivityOptions o;
      o.seed = c.seed + 2;
      expansivity.push_back({{"horizon", horizon},
                             {"linear", expansivity_probe(linear, p.expansivity_pairs, horizon, o)},
                             {"map", expansivity_probe(f, p.expansivity_pairs, horizon, o)}});
    }
    r.data["expansivity"] = expansivity;
    if (p.intersection_pairs > 0) {
      const DisplacementField& h = conjugacy(c, s);
      std::mt19937_64 rng(c.seed + 3);
      Json inter = Json::array();
      for (int k = 0; k < p.intersection_pairs; ++k) {
        const Eigen::Vector2d x(unit(rng), unit(rng)), y(unit(rng), unit(rng));
        const IntersectionResult ir = product_structure_intersect(f, h, x, y);
        inter.push_back({{"forward_residual", ir.forward_residual},
                         {"backward_residual", ir.backward_residual},
                         {"pullback_residual", ir.pullback_residual}});
      }
      r.data["product_structure"] = inter;
    }
  });
}

StageResult stage_graph_transform(const RunConfig& c, PipelineState& s) {
  return run_stage("graphtransform", [&](StageResult& r) {
    const GraphParams& p = c.graph;
    Stopwatch sw;
    const auto& cert = base_certificate(c, s);
    const double bound = 1.0 / cert.lambda + 1e-6;

    FiberedMapSpec plain;
    plain.core = c.map.core;
    plain = make_fibered_map(plain);
    FiberedMapSpec shear = plain;
    shear.fiber_eps = p.shear_eps;
    shear.fiber_modes.modes = {{1, 0, 0.0, 1.0}};
    shear = make_fibered_map(shear);

    const ConnectionSpec flat;
    ConnectionSpec tilted;
    tilted.y_correction = p.connection_correction;

    // Unsheared core.
    const BlockDecomposition b0 = block_decompose(plain, flat, cert, p.n);
    auto [su0, ru0] = solve_unstable_section(b0, p.tol);
    auto [ss0, rs0] = solve_stable_section(b0, p.tol);
    const double lip0 = step_lipschitz(b0, p.lipschitz_pairs, c.seed);
    const SplittingReport sp0 = verify_splitting_rates(b0, su0, ss0);
    check(r, 7, "lipschitz_core", lip0 <= bound, lip0, "<= " + format_double(bound));
    check(r, 7, "sigma_u_zero_core", su0.sup_norm() == 0.0, su0.sup_norm(), "== 0");
    const double rate_err = std::max({std::abs(sp0.min_unstable - cert.lambda), std::abs(sp0.max_unstable - cert.lambda),
                                      std::abs(sp0.min_stable - cert.lambda_s), std::abs(sp0.max_stable - cert.lambda_s)});
    check(r, 7, "rates_core", rate_err <= 1e-6, rate_err, "<= 1e-6");
    const double center_err = std::max(std::abs(sp0.min_center - 1.0), std::abs(sp0.max_center - 1.0));
    check(r, 7, "center_rate_exact", center_err <= 1e-12, center_err, "<= 1e-12");

    // Fiber shear, under two connections.
    const BlockDecomposition b1 = block_decompose(shear, flat, cert, p.n);
    auto [su1, ru1] = solve_unstable_section(b1, p.tol);
    auto [ss1, rs1] = solve_stable_section(b1, p.tol);
    const double lip1 = step_lipschitz(b1, p.lipschitz_pairs, c.seed);
    const OracleReport or1 = power_iteration_oracle(b1, su1, p.oracle_steps);
    const SplittingReport sp1 = verify_splitting_rates(b1, su1, ss1);
    check(r, 7, "lipschitz_shear", lip1 <= bound, lip1, "<= " + format_double(bound));
    check(r, 7, "oracle_angle_shear", or1.max_angle <= 1e-6, or1.max_angle, "<= 1e-6");
    check(r, 7, "invariance_shear", sp1.invariance < 1e-8, sp1.invariance, "< 1e-8");

    const BlockDecomposition b2 = block_decompose(shear, tilted, cert, p.n);
    auto [su2, ru2] = solve_unstable_section(b2, p.tol);
    const OracleReport or2 = power_iteration_oracle(b2, su2, p.oracle_steps);
    check(r, 7, "oracle_angle_tilted_connection", or2.max_angle <= 1e-6, or2.max_angle, "<= 1e-6");
    r.criterion_seconds[7] = sw.seconds();
    runtime_check(r, 7, 60.0);
    s.plot.graph_changes = ru1.change_history;

    auto rates = [](const SplittingReport& sp) {
      return Json{{"unstable", {sp.min_unstable, sp.max_unstable}},
                  {"stable", {sp.min_stable, sp.max_stable}},
                  {"center", {sp.min_center, sp.max_center}},
                  {"invariance", sp.invariance},
                  {"pass", sp.pass}};
    };
    auto report = [](const GraphTransformReport& g) {
      return Json{{"rate_emp", g.rate}, {"lambda_inv", g.lambda_inv}, {"sup_sigma", g.sup_sigma},
                  {"residual", g.residual}, {"iterations", g.iterations}};
    };
    r.data = {{"core", {{"unstable", report(ru0)}, {"stable", report(rs0)}, {"lipschitz", lip0}, {"rates", rates(sp0)}}},
              {"shear",
               {{"eps", p.shear_eps},
                {"unstable", report(ru1)},
                {"stable", report(rs1)},
                {"lipschitz", lip1},
                {"oracle_angle", or1.max_angle},
                {"rates", rates(sp1)},
                {"constant_coefficient_estimate", 2.0 * std::numbers::pi * p.shear_eps / (cert.lambda - 1.0)}}},
              {"shear_tilted_connection",
               {{"correction", p.connection_correction}, {"unstable", report(ru2)}, {"oracle_angle", or2.max_angle}}}};

    // The configured map itself when its base is linear.
    if (induced_base_map(c.map).is_linear()) {
      const BlockDecomposition bm = block_decompose(c.map, flat, cert, p.n);
      auto [sum, rum] = solve_unstable_section(bm, p.tol);
      r.data["map"] = {{"unstable", report(rum)}, {"oracle_angle", power_iteration_oracle(bm, sum, p.oracle_steps).max_angle}};
    } else {
      r.data["map"] = "skipped: nonlinear base map";
    }
    if (s.write_artifacts) {
      write_section_csv(artifact(c, "sigma_u.csv"), su1);
      write_json(artifact(c, "graph_transform.json"), report(ru1));
    }
  });
}

bool RunReport::all_pass() const {
  if (stages.empty()) return false;
  for (const auto& st : stages) {
    if (!st.ok()) return false;
  }
  return true;
}

Json RunReport::to_json() const {
  Json stage_list = Json::array();
  std::map<int, bool> criteria;
  for (const auto& st : stages) {
    Json checks = Json::array();
    for (const auto& ch : st.checks) {
      checks.push_back({{"criterion", ch.criterion}, {"name", ch.name}, {"pass", ch.pass}, {"value", ch.value},
                        {"limit", ch.limit}});
      auto [it, inserted] = criteria.emplace(ch.criterion, ch.pass);
      if (!inserted) it->second = it->second && ch.pass;
    }
    Json times = Json::object();
    for (const auto& [k, t] : st.criterion_seconds) times[std::to_string(k)] = t;
    Json entry = {{"stage", st.stage}, {"ok", st.ok()}, {"seconds", st.seconds}, {"criterion_seconds", times}};
    if (!st.error.empty()) entry["error"] = {{"code", st.error_code}, {"message", st.error}};
    entry["checks"] = checks;
    entry["data"] = st.data;
    stage_list.push_back(entry);
  }
  Json acceptance = Json::object();
  for (const auto& [k, pass] : criteria) acceptance[std::to_string(k)] = pass;
  return {{"config", config_json(config)}, {"all_pass", all_pass()}, {"acceptance", acceptance}, {"stages", stage_list}};
}

RunReport run_command(const RunConfig& c) {
  if (c.workers > 0) omp_set_num_threads(c.workers);
  std::filesystem::create_directories(c.out_dir);
  using StageFn = StageResult (*)(const RunConfig&, PipelineState&);
  std::vector<StageFn> plan;
  if (c.command == "certify") {
    plan = {stage_certify};
  } else if (c.command == "conjugacy") {
    plan = {stage_conjugacy};
  } else if (c.command == "shadow") {
    plan = {stage_shadow};
  } else if (c.command == "periodic") {
    plan = {stage_periodic};
  } else if (c.command == "graphtransform") {
    plan = {stage_graph_transform};
  } else if (c.command == "bundle") {
    plan = {stage_bundle};
  } else if (c.command == "pipeline") {
    plan = {stage_certify, stage_conjugacy, stage_bundle, stage_periodic, stage_shadow, stage_graph_transform};
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown command '" + c.command + "'");
  }

  RunReport report;
  report.config = c;
  PipelineState state;
  state.write_artifacts = true;
  for (StageFn fn : plan) {
    report.stages.push_back(fn(c, state));
    if (!report.stages.back().error.empty()) break;
  }
  report.plot = state.plot;
  write_json(c.out_dir / "report.json", report.to_json());
  emit_plot_data(report, c.out_dir);
  return report;
}

RunReport run_pipeline(RunConfig c) {
  c.command = "pipeline";
  return run_command(c);
}

int emit_plot_data(const RunReport& report, const std::filesystem::path& dir) {
  const PlotData& p = report.plot;
  if (p.empty()) {
    std::cerr << "warning: report has no plot data; nothing written\n";
    return 0;
  }
  std::filesystem::create_directories(dir);
  int files = 0;
  auto curve = [&](const std::vector<double>& changes, const std::string& name) {
    if (changes.empty()) return;
    CsvTable t;
    t.header = {"iteration", "sup_change"};
    for (std::size_t k = 0; k < changes.size(); ++k) t.add({double(k + 1), changes[k]});
    write_csv(dir / name, t);
    ++files;
  };
  curve(p.conjugacy_changes, "conjugacy_convergence.csv");
  curve(p.graph_changes, "graph_transform_convergence.csv");
  if (!p.shadow.empty()) {
    CsvTable t;
    t.header = {"seed", "delta", "epsilon"};
    for (const auto& s : p.shadow) t.add_raw({std::to_string(s.seed), format_double(s.delta), format_double(s.epsilon)});
    write_csv(dir / "shadowing_scatter.csv", t);
    ++files;
  }
  if (!p.counts.empty()) {
    CsvTable t;
    t.header = {"m", "count", "lefschetz"};
    for (const auto& c : p.counts) t.add_raw({std::to_string(c.m), std::to_string(c.count), std::to_string(c.lefschetz)});
    write_csv(dir / "periodic_counts.csv", t);
    ++files;
  }
  return files;
}

}  // namespace nilmodel
