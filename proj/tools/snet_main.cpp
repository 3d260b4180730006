#include <CLI11.hpp>

#include <iostream>

#include "snet/cli.hpp"
#include "snet/errors.hpp"

namespace {

// exit codes: 0 ok, 2 config, 3 data, 4 training divergence, 5 checkpoint
int run(int argc, char** argv) {
  CLI::App app{"extraction-then-synthesis reading comprehension pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    auto opt = [&, sub](const char* flag, const char* key) {
      sub->add_option_function<std::string>(
          flag,
          [&, key](const std::string& v) { overrides.push_back({key, v}); });
    };
    opt("--seed", "seed");
    opt("--data", "data");
    opt("--dev-data", "dev_data");
    opt("--out", "out");
    opt("--beam", "beam");
    opt("--ablation", "ablation");
    opt("--epochs", "epochs");
    opt("--batch", "batch");
    opt("--hidden", "hidden");
    opt("--vocab-size", "vocab_size");
    opt("--answers", "answers");
    sub->add_option_function<std::vector<std::string>>(
        "--ckpt", [&](const std::vector<std::string>& v) {
          for (const auto& p : v) overrides.push_back({"ckpt", p});
        });
  };

  CLI::App* train_extract =
      app.add_subcommand("train-extract", "train the evidence extractor");
  CLI::App* train_synth =
      app.add_subcommand("train-synth", "train the answer synthesizer");
  CLI::App* cmd_run_sub =
      app.add_subcommand("run", "two-stage inference over a dataset");
  CLI::App* eval = app.add_subcommand("eval", "score a run output file");
  CLI::App* ensemble =
      app.add_subcommand("ensemble-select", "greedy dev-set model selection");
  CLI::App* gen = app.add_subcommand("gen-corpus", "write a synthetic corpus");
  for (CLI::App* sub :
       {train_extract, train_synth, cmd_run_sub, eval, ensemble, gen}) {
    add_shared(sub);
    sub->add_option_function<std::vector<std::string>>(
        "--set", [&](const std::vector<std::string>& kvs) {
          for (const std::string& kv : kvs) {
            const size_t eq = kv.find('=');
            if (eq == std::string::npos)
              throw CLI::ValidationError("--set expects key=value");
            overrides.push_back({kv.substr(0, eq), kv.substr(eq + 1)});
          }
        },
        "extra key=value override, repeatable");
  }

  CLI11_PARSE(app, argc, argv);

  snet::RunConfig cfg;
  if (!config_path.empty()) cfg = snet::RunConfig::from_file(config_path);
  for (const auto& [k, v] : overrides) cfg.set(k, v);

  if (app.got_subcommand(train_extract)) snet::cmd_train_extract(cfg);
  else if (app.got_subcommand(train_synth)) snet::cmd_train_synth(cfg);
  else if (app.got_subcommand(cmd_run_sub)) snet::cmd_run(cfg);
  else if (app.got_subcommand(eval)) snet::cmd_eval(cfg);
  else if (app.got_subcommand(ensemble)) snet::cmd_ensemble_select(cfg);
  else if (app.got_subcommand(gen)) snet::cmd_gen_corpus(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const snet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const snet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const snet::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 4;
  } catch (const snet::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
