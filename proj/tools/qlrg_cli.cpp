// qlrg <subcommand> [--config PATH] [--seed N] [--out DIR] [--workers N] [--tol X]
//
// Exit codes: 0 all invariants pass, 1 hard failure, 2 usage or config error,
// 3 statistical (soft) failure.

#include "qlrg/qlrg.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

const std::vector<std::string> kSubcommands{"wick-check",      "convolution-check", "integrate-out",
                                            "flow",            "compare-flow-mc",   "fejer-demo",
                                            "jensen-check",    "default-config"};

int usage_error(const std::string& msg) {
  std::cerr << "qlrg: " << msg << "\n";
  return 2;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasilocal renormalization group experiments"};
  std::string subcommand, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> tol;
  app.add_option("subcommand", subcommand, "experiment to run")
      ->required()
      ->check(CLI::IsMember(kSubcommands));
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "tolerance of the exact checks (overrides the config)")
      ->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (subcommand == "default-config") {
    char* s = nullptr;
    if (qlrg_default_config(&s) != QLRG_OK) return usage_error(qlrg_last_error());
    std::cout << s << "\n";
    qlrg_string_free(s);
    return 0;
  }

  nlohmann::json cfg = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) return usage_error("cannot read " + config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
      cfg = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      return usage_error("malformed config " + config_path + ": " + e.what());
    }
    if (!cfg.is_object()) return usage_error("config must be a JSON object");
  }
  if (seed) cfg["seed"] = *seed;
  if (workers) cfg["workers"] = *workers;
  if (tol) cfg["checks"]["exact_tol"] = *tol;

  int verdict = 0;
  const std::string text = cfg.dump();
  const qlrg_status st =
      qlrg_run_experiment(subcommand.c_str(), text.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), &verdict);
  if (st == QLRG_ERR_PARSE || st == QLRG_ERR_INVALID_ARGUMENT) return usage_error(qlrg_last_error());
  if (st != QLRG_OK) {
    std::cerr << "qlrg: " << qlrg_last_error() << "\n";
    return 1;
  }
  static const char* names[] = {"pass", "hard failure", "", "statistical failure"};
  std::cout << subcommand << ": " << names[verdict] << "\n";
  return verdict;
}
