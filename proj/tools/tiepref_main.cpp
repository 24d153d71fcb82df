// tiepref — preference modeling with ties, end to end from the command line.
//
// Subcommands: gen-data, fit, eval, bias-table, bias-curve. Every run is
// deterministic given its flags: all randomness flows from --seed through
// named substreams. Human-readable summaries go to stdout, timing chatter to
// stderr, machine-readable data to the requested files.

#include <cstdio>
#include <exception>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tiepref/dataset.hpp"
#include "tiepref/experiments.hpp"
#include "tiepref/format.hpp"
#include "tiepref/prefcore.hpp"
#include "tiepref/reward.hpp"
#include "tiepref/train.hpp"

namespace {

using namespace tiepref;

struct GenDataArgs {
  std::string out;
  std::string break_ties_out;
  std::string save_truth;
  double theta = 2.0;
  std::size_t dimension = 2;
  std::size_t prompts = 50;
  std::size_t pairs = 20;
  std::uint64_t seed = 0;
  bool argmax_labels = false;
};

int run_gen_data(const GenDataArgs& args) {
  const TieModelParams params(args.theta);
  const TabularReward truth = random_ground_truth(
      args.dimension, args.prompts, derive_seed(args.seed, "truth"));
  PreferenceDataset dataset =
      generate_synthetic(args.prompts, args.pairs, args.dimension, truth,
                         params, derive_seed(args.seed, "gen"));
  if (args.argmax_labels) {
    dataset = relabel_by_truth(dataset, truth);
  }
  write_records(dataset, std::filesystem::path(args.out));
  std::cout << "wrote " << args.out << ": records=" << dataset.meta.n_records
            << " ties=" << dataset.meta.n_ties << "\n";

  if (!args.break_ties_out.empty()) {
    const PreferenceDataset broken =
        break_ties(dataset, derive_seed(args.seed, "tie-break"));
    write_records(broken, std::filesystem::path(args.break_ties_out));
    std::cout << "wrote " << args.break_ties_out
              << ": records=" << broken.meta.n_records
              << " ties=" << broken.meta.n_ties << "\n";
  }
  if (!args.save_truth.empty()) {
    save_checkpoint(truth, args.save_truth);
    std::cout << "wrote " << args.save_truth
              << ": ground-truth table, params=" << truth.param_count() << "\n";
  }
  return 0;
}

struct FitArgs {
  std::string data;
  std::string loss = "bt";
  std::string model = "mlp";
  std::string out_checkpoint;
  std::string out_report;
  double theta = 1.0;
  std::size_t hidden = 32;
  std::size_t buckets = 0;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::size_t epochs = 200;
  double tol = 1e-6;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool attach_offset = false;
};

LossKind parse_loss(const std::string& name) {
  if (name == "bt") return LossKind::Bt;
  if (name == "btt") return LossKind::Btt;
  if (name == "corrected") return LossKind::BiasCorrected;
  throw ContractError("unknown loss \"" + name + "\"");
}

int run_fit(const FitArgs& args) {
  const PreferenceDataset dataset = read_records(std::filesystem::path(args.data));

  std::size_t max_prompt = 0;
  for (const auto& rec : dataset.records) {
    max_prompt = std::max<std::size_t>(max_prompt, rec.prompt_id);
  }
  const std::size_t n_prompts = dataset.records.empty() ? 1 : max_prompt + 1;

  std::unique_ptr<RewardModel> model;
  if (args.model == "linear") {
    model = std::make_unique<LinearReward>(dataset.dimension, n_prompts);
  } else if (args.model == "mlp") {
    const std::size_t buckets = args.buckets == 0 ? n_prompts : args.buckets;
    model = std::make_unique<MlpReward>(dataset.dimension, args.hidden, buckets,
                                        derive_seed(args.seed, "init"));
  } else {
    throw ContractError("unknown model \"" + args.model + "\"");
  }

  TrainConfig config;
  config.loss_kind = parse_loss(args.loss);
  config.theta = TieModelParams(args.theta);
  config.learning_rate = args.lr;
  config.batch_size = args.batch;
  config.max_epochs = args.epochs;
  config.convergence_tol = args.tol;
  config.rmsprop_decay = args.rmsprop_decay;
  config.rmsprop_epsilon = args.rmsprop_epsilon;
  config.seed = derive_seed(args.seed, "train");
  config.correction_gradient = args.attach_offset
                                   ? CorrectionGradient::Attached
                                   : CorrectionGradient::Detached;

  const TrainReport report = train(*model, dataset, config);

  // Live table on stderr; the report file stays free of timing noise.
  std::cerr << "epoch loss grad_norm wall_ms\n";
  double wall_ms = 0.0;
  for (const auto& e : report.epochs) {
    std::cerr << e.epoch << ' ' << format_double(e.loss) << ' '
              << format_double(e.grad_norm) << ' ' << e.wall_ms << "\n";
    wall_ms += e.wall_ms;
  }
  std::cerr << "trained " << report.epochs.size() << " epochs in " << wall_ms
            << " ms\n";

  if (!args.out_checkpoint.empty()) {
    save_checkpoint(*model, args.out_checkpoint);
  }
  if (!args.out_report.empty()) {
    write_report(report, std::filesystem::path(args.out_report));
  }
  std::cout << "fit: loss=" << args.loss << " epochs=" << report.epochs.size()
            << " final_loss=" << format_double(report.final_loss) << " stop="
            << (report.stop_reason == StopReason::Converged ? "converged"
                                                            : "max_epochs")
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string truth;
};

int run_eval(const EvalArgs& args) {
  const PreferenceDataset dataset = read_records(std::filesystem::path(args.data));
  const auto model = load_checkpoint(args.checkpoint);
  const AccuracyResult acc = eval_accuracy(*model, dataset);
  std::cout << "accuracy=" << format_double(acc.accuracy)
            << " n_used=" << acc.n_used
            << " n_ties_skipped=" << acc.n_ties_skipped << "\n";
  if (!args.truth.empty()) {
    const auto truth = load_checkpoint(args.truth);
    const double bias = eval_mean_abs_bias(*model, *truth, dataset.records);
    std::cout << "mean_abs_bias=" << format_double(bias) << "\n";
  }
  return 0;
}

struct BiasTableArgs {
  std::vector<double> thetas = {2.0, 5.0, 10.0};
  std::string out;
  std::uint64_t seed = 0;
  BiasGapConfig config;
};

int run_bias_table(const BiasTableArgs& args) {
  const auto results = run_bias_gap(args.thetas, args.config, args.seed);
  if (args.out.empty()) {
    write_bias_gap_csv(results, std::cout);
  } else {
    write_bias_gap_csv(results, std::filesystem::path(args.out));
    std::cout << "wrote " << args.out << ": rows=" << results.size() << "\n";
  }
  return 0;
}

struct BiasCurveArgs {
  std::vector<double> thetas = {2.0, 5.0, 10.0};
  double lo = -0.6;
  double hi = 2.94;
  std::size_t points = 60;
  std::string out;
};

int run_bias_curve(const BiasCurveArgs& args) {
  const auto rows = emit_bias_curves(args.thetas, args.lo, args.hi, args.points);
  if (args.out.empty()) {
    write_bias_curve_csv(rows, std::cout);
  } else {
    write_bias_curve_csv(rows, std::filesystem::path(args.out));
    std::cout << "wrote " << args.out << ": rows=" << rows.size() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference modeling with ties: BT/BTT likelihoods, the "
               "preference-strength bias map, bias-corrected training, and "
               "the ground-truth simulation harness."};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Flat key=value config file, one [subcommand] section per "
                 "subcommand; command-line flags win");

  GenDataArgs gen;
  auto* cmd_gen = app.add_subcommand(
      "gen-data", "Generate a BTT-labeled synthetic preference dataset");
  cmd_gen->add_option("--out", gen.out, "Output dataset file (with ties)")
      ->required();
  cmd_gen->add_option("--break-ties", gen.break_ties_out,
                      "Also write the tie-broken dataset to this path")
      ->capture_default_str();
  cmd_gen->add_option("--save-truth", gen.save_truth,
                      "Write the ground-truth table checkpoint here")
      ->capture_default_str();
  cmd_gen->add_option("--theta", gen.theta, "Tie propensity (>= 1)")
      ->capture_default_str();
  cmd_gen->add_option("--dim", gen.dimension, "Response feature dimension")
      ->capture_default_str();
  cmd_gen->add_option("--prompts", gen.prompts, "Number of prompts")
      ->capture_default_str();
  cmd_gen->add_option("--pairs", gen.pairs, "Pairs per prompt")
      ->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  cmd_gen->add_flag("--argmax-labels", gen.argmax_labels,
                    "Label by the sign of the true strength (noiseless)");

  FitArgs fit;
  auto* cmd_fit =
      app.add_subcommand("fit", "Fit a reward model to a dataset file");
  cmd_fit->add_option("--data", fit.data, "Input dataset file")->required();
  cmd_fit->add_option("--loss", fit.loss, "Loss: bt | btt | corrected")
      ->check(CLI::IsMember({"bt", "btt", "corrected"}))
      ->capture_default_str();
  cmd_fit->add_option("--model", fit.model, "Model: linear | mlp")
      ->check(CLI::IsMember({"linear", "mlp"}))
      ->capture_default_str();
  cmd_fit->add_option("--theta", fit.theta, "Tie propensity for btt/corrected")
      ->capture_default_str();
  cmd_fit->add_option("--hidden", fit.hidden, "MLP hidden width")
      ->capture_default_str();
  cmd_fit->add_option("--buckets", fit.buckets,
                      "MLP prompt buckets (0 = number of prompts)")
      ->capture_default_str();
  cmd_fit->add_option("--lr", fit.lr, "Learning rate")->capture_default_str();
  cmd_fit->add_option("--batch", fit.batch, "Minibatch size")
      ->capture_default_str();
  cmd_fit->add_option("--epochs", fit.epochs, "Maximum epochs")
      ->capture_default_str();
  cmd_fit->add_option("--tol", fit.tol, "Relative loss convergence threshold")
      ->capture_default_str();
  cmd_fit->add_option("--rmsprop-decay", fit.rmsprop_decay, "RMSprop decay")
      ->capture_default_str();
  cmd_fit->add_option("--rmsprop-epsilon", fit.rmsprop_epsilon,
                      "RMSprop epsilon")
      ->capture_default_str();
  cmd_fit->add_option("--seed", fit.seed, "Master seed")->capture_default_str();
  cmd_fit->add_flag("--attach-offset", fit.attach_offset,
                    "Backpropagate through the bias-correction offset");
  cmd_fit->add_option("--out-checkpoint", fit.out_checkpoint,
                      "Write the fitted parameters here")
      ->capture_default_str();
  cmd_fit->add_option("--out-report", fit.out_report,
                      "Write the per-epoch training report here")
      ->capture_default_str();

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint on a dataset (accuracy, optional bias)");
  cmd_eval->add_option("--data", ev.data, "Input dataset file")->required();
  cmd_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")
      ->required();
  cmd_eval->add_option("--truth", ev.truth,
                       "Ground-truth checkpoint for mean absolute bias")
      ->capture_default_str();

  BiasTableArgs table;
  auto* cmd_table = app.add_subcommand(
      "bias-table", "Run the ground-truth bias-gap simulation per theta");
  cmd_table->add_option("--thetas", table.thetas, "Tie propensities (> 1)")
      ->delimiter(',')
      ->capture_default_str();
  cmd_table->add_option("--out", table.out, "Output CSV (default: stdout)")
      ->capture_default_str();
  cmd_table->add_option("--seed", table.seed, "Master seed")
      ->capture_default_str();
  cmd_table->add_option("--prompts", table.config.n_prompts, "Prompts")
      ->capture_default_str();
  cmd_table->add_option("--pairs", table.config.pairs_per_prompt,
                        "Training pairs per prompt")
      ->capture_default_str();
  cmd_table->add_option("--dim", table.config.dimension, "Feature dimension")
      ->capture_default_str();
  cmd_table->add_option("--eval-pairs", table.config.eval_pairs_per_prompt,
                        "Held-out pairs per prompt")
      ->capture_default_str();
  cmd_table->add_option("--hidden", table.config.hidden, "MLP hidden width")
      ->capture_default_str();
  cmd_table->add_option("--lr", table.config.train.learning_rate,
                        "Learning rate")
      ->capture_default_str();
  cmd_table->add_option("--epochs", table.config.train.max_epochs,
                        "Maximum epochs")
      ->capture_default_str();
  cmd_table->add_option("--batch", table.config.train.batch_size,
                        "Minibatch size")
      ->capture_default_str();
  cmd_table->add_option("--tol", table.config.train.convergence_tol,
                        "Relative loss convergence threshold (0 = never stop)")
      ->capture_default_str();

  BiasCurveArgs curve;
  auto* cmd_curve = app.add_subcommand(
      "bias-curve", "Tabulate the bias term and bias/strength ratio");
  cmd_curve->add_option("--thetas", curve.thetas, "Tie propensities (>= 1)")
      ->delimiter(',')
      ->capture_default_str();
  cmd_curve->add_option("--lo", curve.lo, "Strength range lower end")
      ->capture_default_str();
  cmd_curve->add_option("--hi", curve.hi, "Strength range upper end")
      ->capture_default_str();
  cmd_curve->add_option("--points", curve.points, "Points per theta")
      ->capture_default_str();
  cmd_curve->add_option("--out", curve.out, "Output CSV (default: stdout)")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) return run_gen_data(gen);
    if (cmd_fit->parsed()) return run_fit(fit);
    if (cmd_eval->parsed()) return run_eval(ev);
    if (cmd_table->parsed()) return run_bias_table(table);
    if (cmd_curve->parsed()) return run_bias_curve(curve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
