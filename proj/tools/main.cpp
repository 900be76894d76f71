#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "evomem/errors.hpp"
#include "evomem/run.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool parallel = false;
};

void add_common_options(CLI::App* cmd, CommonOptions* opts, bool config_required) {
  auto* config = cmd->add_option("--config", opts->config, "Configuration file (JSON)");
  if (config_required) config->required();
  cmd->add_option("--out", opts->out, "Report output path")->required();
  cmd->add_option("--format", opts->format, "Report format: csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--seed", opts->seed, "Seed for reproducible random instances");
  cmd->add_flag("--parallel", opts->parallel, "Evaluate independent report rows concurrently");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "evomem: exact tiled Evoformer attention checks and long-sequence memory planning"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    bool config_required;
  };
  const Command commands[] = {
      {"attn-bench", "Compare naive and tiled attention peaks and outputs", false},
      {"gradcheck", "Check attention gradients against finite differences", false},
      {"precision-demo", "Show the low-precision bias-gradient accumulation hazard", false},
      {"plan-max-seq", "Largest sequence length that fits the modelled devices", false},
      {"plan-breakdown", "Per-device memory breakdown at a fixed sequence length", true},
      {"sweep", "Max sequence length across device counts and framework profiles", false},
  };

  CommonOptions opts[std::size(commands)];
  CLI::App* subs[std::size(commands)];
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    subs[i] = app.add_subcommand(commands[i].name, commands[i].help);
    add_common_options(subs[i], &opts[i], commands[i].config_required);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < std::size(commands); ++i) {
    if (!subs[i]->parsed()) continue;
    evomem::RunSpec spec;
    spec.command = commands[i].name;
    spec.config_path = opts[i].config;
    spec.output_path = opts[i].out;
    spec.format = opts[i].format == "json" ? evomem::ReportFormat::Json
                                           : evomem::ReportFormat::Csv;
    spec.seed = opts[i].seed;
    spec.parallel = opts[i].parallel;
    try {
      return evomem::run(spec, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
