// valign: command-line driver for the audit pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "valign/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cultural value alignment audit toolkit"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string run_dir;
    std::optional<std::uint64_t> seed;
    bool force = false;
  };
  Args args;

  std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "Compute population value polarity vectors from the survey"},
      {"baseline", "Human resampling consistency and uniform-random alignment baselines"},
      {"elicit", "Collect model responses (resumable)"},
      {"annotate", "Split responses into substatements and label stance"},
      {"score", "Generation/condition value polarity, alignment and self-consistency"},
      {"analyze", "Fit the capability mixed model and the US-bias regression"},
      {"report", "Write figure data files and a summary"},
      {"validate-judge", "Compare the judge against the gold set"},
      {"all", "Run ingest through report"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "Audit config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--run-dir", args.run_dir, "Run directory")->required();
    sub->add_option("--seed", args.seed, "Override the config seed");
    sub->add_flag("--force", args.force, "Re-run even if the stage is complete");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  valign::StageOptions options;
  options.config_path = args.config;
  options.run_dir = args.run_dir;
  options.seed = args.seed;
  options.force = args.force;
  options.log = &std::cerr;

  const std::string name = app.get_subcommands().front()->get_name();
  if (name != "all") return valign::run_stage_exit_code(name, options, std::cerr);
  for (const char* stage : {"ingest", "baseline", "elicit", "annotate", "score", "analyze", "report"}) {
    if (const int code = valign::run_stage_exit_code(stage, options, std::cerr); code != 0) return code;
  }
  return 0;
}
