// Command line front end: generate / train / eval / pipeline / inspect.
//
// Output directory precedence: --out verbatim when given, otherwise
// $SEMBEAM_OUT/<config output key>, otherwise <config output key> alone.
// --seed overrides the config's master seed before any derived seed is
// computed, so a flag override behaves exactly like editing the file.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sembeam/config.hpp"
#include "sembeam/pipeline.hpp"
#include "sembeam/util.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  long long seed = 0;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config,-c", o.config, "Experiment config file")->required();
  cmd->add_option("--out,-o", o.out, "Output directory (overrides config and SEMBEAM_OUT)");
  cmd->add_option("--seed", o.seed, "Master seed override")
      ->each([&o](const std::string&) { o.has_seed = true; });
}

sembeam::config::ExperimentConfig load_cfg(CommonOpts& o) {
  auto kv = sembeam::config::KeyValues::parse_file(o.config);
  if (o.has_seed) kv.set("seed", std::to_string(o.seed));
  return sembeam::config::experiment_from_keyvalues(kv);
}

std::string resolve_out(const CommonOpts& o, const sembeam::config::ExperimentConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* root = std::getenv("SEMBEAM_OUT"); root != nullptr && root[0] != '\0') {
    return std::string(root) + "/" + cfg.output_dir;
  }
  return cfg.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed semantic-aided beam prediction testbed"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, eval_o, pipe_o;
  std::string train_model = "all";
  int train_node = -1;
  std::string inspect_path, inspect_config;

  CLI::App* gen = app.add_subcommand("generate", "Simulate a scenario and write datasets");
  add_common(gen, gen_o);

  CLI::App* train = app.add_subcommand("train", "Train one model or all of them");
  add_common(train, train_o);
  train->add_option("--model", train_model,
                    "identifier, baseline, bbox-fcnn, mask-lenet, bbox-lstm, mask-lstm, or all");
  train->add_option("--node", train_node, "Node id (1-based); default all nodes");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate checkpoints and write report CSVs");
  add_common(eval, eval_o);

  CLI::App* pipe = app.add_subcommand("pipeline", "generate + train + eval in one run");
  add_common(pipe, pipe_o);

  CLI::App* inspect = app.add_subcommand("inspect", "Pretty-print any artifact file");
  inspect->add_option("path", inspect_path, "Artifact to inspect")->required();
  inspect->add_option("--config,-c", inspect_config,
                      "Config file (needed for message streams)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      auto cfg = load_cfg(gen_o);
      sembeam::pipeline::cmd_generate(cfg, resolve_out(gen_o, cfg));
    } else if (train->parsed()) {
      auto cfg = load_cfg(train_o);
      sembeam::pipeline::cmd_train(cfg, resolve_out(train_o, cfg), train_model, train_node);
    } else if (eval->parsed()) {
      auto cfg = load_cfg(eval_o);
      sembeam::pipeline::cmd_eval(cfg, resolve_out(eval_o, cfg));
    } else if (pipe->parsed()) {
      auto cfg = load_cfg(pipe_o);
      sembeam::pipeline::cmd_pipeline(cfg, resolve_out(pipe_o, cfg));
    } else if (inspect->parsed()) {
      if (inspect_config.empty()) {
        sembeam::pipeline::cmd_inspect(inspect_path, nullptr);
      } else {
        const auto cfg = sembeam::config::load_experiment_config(inspect_config);
        sembeam::pipeline::cmd_inspect(inspect_path, &cfg);
      }
    }
  } catch (const sembeam::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sembeam::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
