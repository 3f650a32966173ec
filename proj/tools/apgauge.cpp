#include "apgauge/commands.hpp"
#include "apgauge/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

int main(int argc, char** argv) {
  CLI::App app{"Gauge-transform pipeline for A0(hD) + eps B(x, hD) with almost-periodic B"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  int threads = -1;
  std::vector<std::string> overrides;
  bool quiet = false;

  const std::map<std::string, std::string> about{
      {"conditions", "check frequency-set conditions A-D"},
      {"zones", "export the resonance zone decomposition"},
      {"gauge", "summarize the gauge chains of every zone"},
      {"ids", "integrated density of states via the pipeline"},
      {"oracle", "Bloch-Floquet reference IDS (lattice frequencies only)"},
      {"converge", "pipeline vs oracle over h, with log-log slopes per K"},
      {"propagate", "propagation norms between momentum cutoffs"},
  };
  for (const auto& name : apgauge::command_names()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: the config's \"out\")");
    sub->add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
    sub->add_option("--override", overrides, "key=value applied to the config before validation, e.g. h=[0.1,0.05]");
    sub->add_flag("--quiet", quiet, "suppress the summary on stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(apgauge::ErrorCategory::Config);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (threads >= 0) overrides.push_back("threads=" + std::to_string(threads));
    const apgauge::RunConfig cfg = apgauge::load_config(config_path, overrides);
    const auto res = apgauge::run_command(command, cfg, out_dir.empty() ? cfg.out : out_dir);
    if (!quiet) std::cout << res.summary;
    return 0;
  } catch (const apgauge::Error& e) {
    std::cerr << "apgauge " << command << ": " << apgauge::category_name(e.category()) << " error: " << e.what()
              << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "apgauge " << command << ": internal error: " << e.what() << "\n";
    return 1;
  }
}
