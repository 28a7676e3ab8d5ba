// gse: explain a distribution shift, evaluate it, probe its robustness and
// export plot data.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gse/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string run_dir;
  std::string preset;
  std::string feasibility;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> worst_trials;
  std::optional<int> repeats;
};

gse::RunConfig resolved_config(const Options& o) {
  gse::RunConfig cfg = gse::load_run_config(o.config);
  if (!o.preset.empty()) gse::apply_preset(cfg, o.preset);
  if (o.seed) {
    cfg.seed = *o.seed;
    if (!cfg.perturbation_seed_explicit) cfg.perturbation.seed = *o.seed;
  }
  if (o.trials) cfg.robustness.trials = *o.trials;
  if (o.worst_trials) cfg.robustness.worst_trials = *o.worst_trials;
  if (o.repeats) cfg.repeats = *o.repeats;
  if (cfg.repeats < 1) throw gse::Error("cli", "config", "--repeats must be >= 1");
  return cfg;
}

void print_summary(const nlohmann::json& r) {
  std::cout << "pe " << r["pe"].get<double>() << "\nwg_pe " << r["wg_pe"].get<double>() << "\nfeasible_pct "
            << r["feasible_pct"].get<double>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-aware distribution shift explanations"};
  app.require_subcommand(1);
  Options o;

  auto* explain = app.add_subcommand("explain", "fit a shift explanation and write a run directory");
  auto* evaluate = app.add_subcommand("evaluate", "recompute PE, WG-PE and feasibility for a run directory");
  auto* robust = app.add_subcommand("robustness", "measure robustness to random perturbations of the source");
  auto* plot = app.add_subcommand("plotdata", "export loss-trace and group-PE CSVs from a run directory");

  for (auto* cmd : {explain, robust}) {
    cmd->add_option("--config", o.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, std::string("output directory (default: $") + gse::kOutputRootEnv + "/<name>)");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--preset", o.preset, "named hyperparameter preset");
  }
  explain->add_option("--repeats", o.repeats, "fits with consecutive seeds for mean and std (default 3)");
  robust->add_option("--trials", o.trials, "perturbations averaged into omega (default 3)");
  robust->add_option("--worst-trials", o.worst_trials, "perturbations searched for omega_worst (default 100)");
  for (auto* cmd : {evaluate, plot}) {
    cmd->add_option("--out,run_dir", o.run_dir, "run directory")->required();
  }
  evaluate->add_option("--feasibility", o.feasibility, "feasibility rule override (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (explain->parsed()) {
      const auto cfg = resolved_config(o);
      const std::string dir = gse::resolve_output_dir(cfg, o.out);
      const auto report = gse::cmd_explain(cfg, dir);
      for (const auto& line : report["explanation"]) std::cout << line.get<std::string>() << "\n";
      print_summary(report);
      std::cout << "wrote " << dir << "\n";
    } else if (robust->parsed()) {
      const auto cfg = resolved_config(o);
      const std::string dir = gse::resolve_output_dir(cfg, o.out);
      const auto report = gse::cmd_robustness(cfg, dir);
      std::cout << "omega " << report["robustness"]["omega"].get<double>() << "\nomega_worst "
                << report["robustness"]["omega_worst"].get<double>() << "\n";
      std::cout << "wrote " << dir << "\n";
    } else if (evaluate->parsed()) {
      std::optional<nlohmann::json> rule;
      if (!o.feasibility.empty()) {
        try {
          rule = nlohmann::json::parse(o.feasibility);
        } catch (const nlohmann::json::exception& e) {
          throw gse::Error("cli", "evaluate", std::string("--feasibility is not valid JSON: ") + e.what());
        }
      }
      print_summary(gse::cmd_evaluate(o.run_dir, rule));
    } else if (plot->parsed()) {
      for (const auto& f : gse::cmd_plotdata(o.run_dir)) std::cout << "wrote " << f.string() << "\n";
    }
  } catch (const gse::Error& e) {
    std::cerr << "gse: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gse: cli/internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
