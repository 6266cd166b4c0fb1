#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "fsl/errors.hpp"
#include "run_config.hpp"

namespace {

// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical/training failure.
int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const fsl::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fsl::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const fsl::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fsl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate modeling lab for laser-fusion yield prediction"};
  app.require_subcommand(1);

  fsl::cli::GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  generate->add_option("--n", gen.n, "Number of records");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--noise", gen.noise, "Lognormal noise sigma");
  generate->add_option("--campaigns", gen.campaigns, "Number of campaign centers");
  generate->add_option("--out", gen.out, "Output CSV path")->required();

  fsl::cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train.config_path, "Run config file")->required();
  train_cmd->add_option("--data", train.data_path, "Training dataset CSV")->required();
  train_cmd->add_option("--out", train.out_dir, "Output directory")->required();

  fsl::cli::EvalOptions eval;
  std::int64_t eval_seed = -1;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model under a split protocol");
  eval_cmd->add_option("--model", eval.model, "Checkpoint path or 'expert'")->required();
  eval_cmd->add_option("--data", eval.data_path, "Dataset CSV")->required();
  eval_cmd->add_option("--splits", eval.splits, "kfold[:<k>] | kmeans | cluster:<i>");
  int split_index = -1;
  eval_cmd->add_option("--split-index", split_index, "Evaluate a single k-fold split");
  eval_cmd->add_option("--k-max", eval.k_max, "Silhouette scan upper bound");
  eval_cmd->add_option("--seed", eval_seed, "Override the protocol seed");
  eval_cmd->add_option("--report", eval.report_path, "Report JSON path");

  fsl::cli::PdOptions pd;
  auto* pd_cmd = app.add_subcommand("pd", "Partial-dependence curves (CSV + SVG)");
  pd_cmd->add_option("--model", pd.model, "Checkpoint path or 'expert'")->required();
  pd_cmd->add_option("--data", pd.data_path, "Dataset CSV")->required();
  pd_cmd->add_option("--feature", pd.feature, "Physical feature name or 'all'")->required();
  pd_cmd->add_option("--out-dir", pd.out_dir, "Output directory");
  pd_cmd->add_option("--out-csv", pd.out_csv, "CSV path (single feature)");
  pd_cmd->add_option("--out-svg", pd.out_svg, "SVG path (single feature)");

  fsl::cli::CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "Exponent agreement vs the expert model");
  compare_cmd->add_option("--models", compare.models, "Checkpoints or 'expert'")->required();
  compare_cmd->add_option("--data", compare.data_path, "Dataset CSV")->required();
  compare_cmd->add_option("--report", compare.report_path, "Report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (generate->parsed()) return run_guarded([&] { return fsl::cli::cmd_generate(gen); });
  if (train_cmd->parsed()) return run_guarded([&] { return fsl::cli::cmd_train(train); });
  if (eval_cmd->parsed()) {
    if (split_index >= 0) eval.split_index = split_index;
    if (eval_seed >= 0) eval.seed = static_cast<std::uint64_t>(eval_seed);
    return run_guarded([&] { return fsl::cli::cmd_eval(eval); });
  }
  if (pd_cmd->parsed()) return run_guarded([&] { return fsl::cli::cmd_pd(pd); });
  if (compare_cmd->parsed()) return run_guarded([&] { return fsl::cli::cmd_compare(compare); });
  return 1;
}
