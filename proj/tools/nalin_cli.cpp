#include "nalin/nalin.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

constexpr int kConfigError = 64;

int report_failure(int status, const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, nalin_last_error());
  return status == NALIN_CONFIG || status == NALIN_IO || status == NALIN_INVALID_ARGUMENT ? kConfigError : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dichotomy spectra, linearization conditions and conjugacies of nonautonomous ODEs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool override_budget = false;

  struct Cmd {
    const char* name;
    const char* help;
    nalin_command command;
  };
  const Cmd cmds[] = {
      {"spectrum", "estimate the dichotomy spectrum", NALIN_CMD_SPECTRUM},
      {"conditions", "check the spectral bound, alpha and the smallness budget", NALIN_CMD_CONDITIONS},
      {"linearize", "build the conjugacies and verify them", NALIN_CMD_LINEARIZE},
      {"verify", "re-check an existing conjugacy dump in the output directory", NALIN_CMD_VERIFY},
  };
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed overriding the config");
    sub->add_flag("--override-budget", override_budget, "exit by the verification outcome even outside the budget");
  }
  CLI::App* list = app.add_subcommand("catalog", "list catalog systems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (list->parsed()) {
    for (std::size_t i = 0; i < nalin_catalog_count(); ++i) std::printf("%s\n", nalin_catalog_name(i));
    return 0;
  }

  nalin_command command = NALIN_CMD_SPECTRUM;
  bool seeded = false;
  for (const auto& c : cmds) {
    if (CLI::App* sub = app.get_subcommand(c.name); sub->parsed()) {
      command = c.command;
      seeded = sub->count("--seed") > 0;
    }
  }

  nalin_config* config = nullptr;
  if (int st = nalin_config_load(config_path.c_str(), &config); st != NALIN_OK) return report_failure(st, "config");
  if (seeded) nalin_config_set_seed(config, seed);

  nalin_result* result = nullptr;
  const int st = nalin_run(config, command, out_dir.empty() ? nullptr : out_dir.c_str(),
                           override_budget ? NALIN_OVERRIDE_BUDGET : 0u, &result);
  nalin_config_free(config);
  if (st != NALIN_OK) return report_failure(st, "run");

  for (std::size_t i = 0; i < nalin_result_message_count(result); ++i) {
    std::fprintf(stderr, "%s\n", nalin_result_message(result, i));
  }
  for (std::size_t i = 0; i < nalin_result_file_count(result); ++i) std::printf("wrote %s\n", nalin_result_file(result, i));
  const int code = nalin_result_exit_code(result);
  nalin_result_free(result);
  return code;
}
