// fedclaims: claims-loss federation experiments from a JSON config.
//   fedclaims generate --config cfg.json
//   fedclaims run      --config cfg.json --mode local|hfl|vfl
//   fedclaims report   <eval.jsonl>...
//   fedclaims serve    --config cfg.json --role aggregator|collaborator|
//                      label-worker|feature-worker [--id N] [--port-file F]
// Exit codes: 0 success, 2 config error, 3 training error, 4 protocol error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedclaims/error.hpp"
#include "fedclaims/experiment.hpp"

namespace {

fedclaims::ExperimentConfig load(const std::string& config_path,
                                 const std::optional<std::uint64_t>& seed,
                                 const std::string& out_dir) {
  auto config = fedclaims::load_config(config_path);
  if (seed) config.seed = *seed;
  if (!out_dir.empty()) config.output_dir = out_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated claims-loss modeling experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode = "local";
  std::string role;
  std::string out_dir;
  std::string port_file;
  std::optional<std::uint64_t> seed;
  std::uint16_t id = 0;
  std::vector<std::string> report_paths;

  auto* generate = app.add_subcommand("generate", "write synthetic datasets + manifest");
  generate->add_option("--config", config_path, "experiment config JSON")->required();
  generate->add_option("--seed", seed, "override config seed");
  generate->add_option("--out", out_dir, "override output directory");

  auto* run = app.add_subcommand("run", "run a local/hfl/vfl experiment");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--mode", mode, "local | hfl | vfl")->required();
  run->add_option("--seed", seed, "override config seed");
  run->add_option("--out", out_dir, "override output directory");

  auto* report = app.add_subcommand("report", "render local-vs-federated PE tables");
  report->add_option("logs", report_paths, "eval JSONL files")->required();

  auto* serve = app.add_subcommand("serve", "run one federation role over sockets");
  serve->add_option("--config", config_path, "experiment config JSON")->required();
  serve->add_option("--role", role,
                    "aggregator | collaborator | label-worker | feature-worker")
      ->required();
  serve->add_option("--id", id, "party id for collaborator/feature-worker roles");
  serve->add_option("--port-file", port_file,
                    "listener writes its host:port here; dialers poll it");
  serve->add_option("--seed", seed, "override config seed");
  serve->add_option("--out", out_dir, "override output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      fedclaims::cmd_generate(load(config_path, seed, out_dir));
    } else if (run->parsed()) {
      fedclaims::cmd_run(load(config_path, seed, out_dir),
                         fedclaims::mode_from_string(mode));
    } else if (report->parsed()) {
      std::cout << fedclaims::cmd_report(report_paths);
    } else if (serve->parsed()) {
      fedclaims::ServeOptions options;
      options.role = role;
      options.id = id;
      options.port_file = port_file;
      fedclaims::cmd_serve(load(config_path, seed, out_dir), options);
    }
  } catch (const fedclaims::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
