#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace sublaplace;
using namespace sublaplace::cli;

void add_arch(CLI::App* app, ArchOptions& a) {
  app->add_option("--arch", a.widths, "Hidden widths, e.g. --arch 50 50 (overrides --hidden/--layers)");
  app->add_option("--hidden", a.hidden, "Hidden width")->capture_default_str();
  app->add_option("--layers", a.layers, "Number of hidden layers")->capture_default_str();
}

void add_train_config(CLI::App* app, TrainConfig& t) {
  app->add_option("--lr", t.learning_rate, "SGD learning rate")->capture_default_str();
  app->add_option("--momentum", t.momentum, "Nesterov momentum")->capture_default_str();
  app->add_option("--weight-decay", t.weight_decay, "Weight decay")->capture_default_str();
  app->add_option("--batch-size", t.batch_size, "Minibatch size")->capture_default_str();
  app->add_option("--epochs", t.max_epochs, "Maximum epochs")->capture_default_str();
  app->add_option("--patience", t.patience, "Early-stopping patience")->capture_default_str();
}

void add_curvature(CLI::App* app, CurvatureOptions& c) {
  app->add_option("--checkpoint", c.checkpoint, "MAP checkpoint")->required();
  app->add_option("--data", c.data, "CSV overriding the checkpoint's training data");
  app->add_option("--strategy", c.strategy, "wass-exact | wass-diag | random | final-layer | magnitude")
      ->capture_default_str();
  app->add_option("--lambda", c.lambda, "Prior precision of the scoring posterior")->capture_default_str();
  app->add_flag("--include-biases", c.include_biases, "Make biases eligible for inference");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subnetwork linearized Laplace inference for ReLU MLPs"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Fit a MAP estimate");
  c_train->add_option("--data", train.data, "Training CSV with a header row")->required();
  c_train->add_option("--target", train.targets, "Target column(s); default: last column");
  c_train->add_option("--task", train.task, "regression | classification")
      ->check(CLI::IsMember({"regression", "classification"}))
      ->capture_default_str();
  add_arch(c_train, train.arch);
  add_train_config(c_train, train.train);
  c_train->add_option("--split", train.split.kind, "standard | gap | none")
      ->check(CLI::IsMember({"standard", "gap", "none"}))
      ->capture_default_str();
  c_train->add_option("--gap-dim", train.split.gap_dim, "Input dimension for the gap split");
  c_train->add_option("--train-frac", train.split.train_frac, "Train+val fraction")->capture_default_str();
  c_train->add_option("--val-frac", train.split.val_frac, "Validation fraction of train")->capture_default_str();
  c_train->add_option("--split-seed", train.split.split_seed, "Split seed (default: derived from --seed)");
  c_train->add_flag("--no-standardize", train.no_standardize, "Keep raw feature/target scales");
  c_train->add_option("--seed", train.seed, "Seed")->capture_default_str();
  c_train->add_option("--out", train.out, "Checkpoint path")->capture_default_str();

  ScoreOptions score;
  auto* c_score = app.add_subcommand("score", "Write per-weight selection scores");
  add_curvature(c_score, score.curv);
  c_score->add_option("--out", score.out, "Scores CSV")->capture_default_str();

  SelectOptionsCli select;
  auto* c_select = app.add_subcommand("select", "Choose a subnetwork mask");
  add_curvature(c_select, select.curv);
  c_select->add_option("--fraction", select.fraction, "Subnetwork size as a fraction of D");
  c_select->add_option("--size", select.size, "Subnetwork size S");
  c_select->add_flag("--dead-filter", select.dead_filter, "Exclude weights with zero data curvature");
  c_select->add_option("--dead-threshold", select.dead_threshold, "Dead-weight curvature threshold")
      ->capture_default_str();
  c_select->add_option("--seed", select.seed, "Seed for random selection")->capture_default_str();
  c_select->add_option("--bins", select.histogram_bins, "Score histogram bins")->capture_default_str();
  c_select->add_option("--out", select.out, "Mask JSON")->capture_default_str();

  InferOptions infer;
  auto* c_infer = app.add_subcommand("infer", "Fit the Laplace posterior over a mask");
  c_infer->add_option("--checkpoint", infer.checkpoint, "MAP checkpoint")->required();
  c_infer->add_option("--mask", infer.mask, "Mask JSON (default: all weights)");
  c_infer->add_option("--data", infer.data, "CSV overriding the checkpoint's training data");
  c_infer->add_option("--lambda", infer.lambda, "Full-network prior precision")->capture_default_str();
  c_infer->add_flag("--no-rescale", infer.no_rescale, "Use lambda as-is instead of lambda*S/D");
  c_infer->add_flag("--diagonal", infer.diagonal, "Diagonal GGN posterior");
  c_infer->add_option("--out", infer.out, "Posterior JSON")->capture_default_str();

  PredictOptions predict;
  auto* c_predict = app.add_subcommand("predict", "Linearized predictive on a CSV");
  c_predict->add_option("--checkpoint", predict.checkpoint, "MAP checkpoint")->required();
  c_predict->add_option("--posterior", predict.posterior, "Posterior JSON (default: MAP only)");
  c_predict->add_option("--data", predict.data, "Inputs CSV (default: the checkpoint's test split)");
  c_predict->add_option("--out", predict.out, "Predictions CSV")->capture_default_str();

  EvaluateOptions evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score artifacts, or compare methods over splits");
  c_eval->add_option("--checkpoint", evaluate.checkpoint, "MAP checkpoint (artifact mode)");
  c_eval->add_option("--posterior", evaluate.posterior, "Posterior JSON (artifact mode)");
  c_eval->add_option("--data", evaluate.data, "CSV to evaluate on / compare over");
  c_eval->add_option("--target", evaluate.targets, "Target column(s)");
  c_eval->add_option("--methods", evaluate.methods,
                     "Comma list: map, full, diag, final-layer, <strategy>:<fraction>")
      ->capture_default_str();
  c_eval->add_option("--grid", evaluate.grid, "Prior precision grid: default or a comma list")
      ->capture_default_str();
  c_eval->add_option("--splits", evaluate.splits, "Standard splits")->capture_default_str();
  c_eval->add_flag("--no-gap", evaluate.no_gap, "Skip gap splits");
  c_eval->add_option("--max-gap-splits", evaluate.max_gap_splits, "Cap on gap splits (0: one per input)");
  c_eval->add_flag("--include-biases", evaluate.include_biases, "Make biases eligible for inference");
  add_arch(c_eval, evaluate.arch);
  add_train_config(c_eval, evaluate.train);
  c_eval->add_option("--seed", evaluate.seed, "Seed")->capture_default_str();
  c_eval->add_option("--workers", evaluate.workers, "Worker threads (0: SUBLAPLACE_WORKERS or cores)");
  c_eval->add_option("--out", evaluate.out, "Output directory")->capture_default_str();

  ReproduceOptions reproduce;
  auto* c_repro = app.add_subcommand("reproduce", "Run a bundled experiment end to end");
  c_repro->add_option("experiment", reproduce.experiment, "toy1d | two-moons | tabular")
      ->required()
      ->check(CLI::IsMember({"toy1d", "two-moons", "tabular"}));
  c_repro->add_option("--seed", reproduce.seed, "Seed")->capture_default_str();
  c_repro->add_flag("--quick", reproduce.quick, "Short training, fewer splits");
  c_repro->add_flag("--dead-filter", reproduce.dead_filter, "Dead-weight filter for toy1d selection");
  c_repro->add_option("--data", reproduce.data, "Tabular CSV (default: synthetic wine-shaped data)");
  c_repro->add_option("--splits", reproduce.splits, "Standard splits for tabular");
  c_repro->add_option("--workers", reproduce.workers, "Worker threads");
  c_repro->add_option("--out", reproduce.out, "Output directory")->capture_default_str();

  GenerateOptions generate;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  c_gen->add_option("--dataset", generate.dataset, "toy1d | two-moons | synthetic-wine")
      ->check(CLI::IsMember({"toy1d", "two-moons", "synthetic-wine"}))
      ->capture_default_str();
  c_gen->add_option("-n", generate.n, "Points (per cluster for toy1d)");
  c_gen->add_option("--noise", generate.noise, "Noise std");
  c_gen->add_option("--seed", generate.seed, "Seed")->capture_default_str();
  c_gen->add_option("--out", generate.out, "Output CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::vector<std::string> args(argv, argv + argc);
  CLI::App* cmd = app.get_subcommands().front();
  Manifest manifest(cmd->get_name(), args);
  try {
    if (cmd == c_train) cmd_train(train, manifest);
    else if (cmd == c_score) cmd_score(score, manifest);
    else if (cmd == c_select) cmd_select(select, manifest);
    else if (cmd == c_infer) cmd_infer(infer, manifest);
    else if (cmd == c_predict) cmd_predict(predict, manifest);
    else if (cmd == c_eval) cmd_evaluate(evaluate, manifest);
    else if (cmd == c_repro) cmd_reproduce(reproduce, manifest);
    else cmd_generate(generate, manifest);
  } catch (const MissingFile& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
