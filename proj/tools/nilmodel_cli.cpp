#include <CLI11.hpp>

#include <iostream>

#include "nilmodel/errors.hpp"
#include "nilmodel/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  int workers = 0;
  std::optional<unsigned long long> seed;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory (overrides the config)");
  sub->add_option("--workers", o.workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", o.seed, "base seed (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heisenberg nilmanifold dynamics: conjugacy, shadowing, splittings and circle bundles"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"certify", "f0 integrity, base maps and partial hyperbolicity"},
      {"conjugacy", "solve the conjugacy h to the linear base"},
      {"shadow", "shadowing, expansivity and product structure"},
      {"periodic", "Lefschetz counts and perturbed periodic points"},
      {"graphtransform", "invariant splitting by graph transform"},
      {"bundle", "cocycles, reduction, lifted conjugacy and smooth model"},
      {"pipeline", "all stages in order"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);
  CLI11_PARSE(app, argc, argv);

  try {
    nilmodel::RunConfig config = nilmodel::load_config(opts.config);
    config.command = app.get_subcommands().front()->get_name();
    if (!opts.out.empty()) config.out_dir = opts.out;
    if (opts.workers > 0) config.workers = opts.workers;
    if (opts.seed) config.seed = *opts.seed;

    const nilmodel::RunReport report = nilmodel::run_command(config);
    nilmodel::Json summary = {{"command", config.command},
                              {"all_pass", report.all_pass()},
                              {"report", (config.out_dir / "report.json").string()}};
    nilmodel::Json stages = nilmodel::Json::array();
    for (const auto& st : report.stages) {
      nilmodel::Json e = {{"stage", st.stage}, {"ok", st.ok()}, {"seconds", st.seconds}};
      if (!st.error.empty()) e["error"] = st.error;
      stages.push_back(e);
    }
    summary["stages"] = stages;
    std::cout << summary.dump(2) << '\n';
    return report.all_pass() ? 0 : 1;
  } catch (const nilmodel::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
