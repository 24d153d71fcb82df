#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tiepref/dataset.hpp"
#include "tiepref/reward.hpp"
#include "tiepref/train.hpp"

// Desk-scale experiment harness: the ground-truth bias-gap simulation, bias
// curve emission, and evaluation metrics.

namespace tiepref {

// One row of the bias-gap experiment for a single theta.
struct BiasGapResult {
  double theta = 0.0;
  double mean_abs_bias_bt = 0.0;   // mean |delta_bt - delta_truth|
  double mean_abs_bias_btt = 0.0;  // mean |delta_btt - delta_truth|
  double gap = 0.0;                // mean_abs_bias_bt - mean_abs_bias_btt
  std::size_t n_eval_pairs = 0;
  std::uint64_t seed = 0;
};

// Generation/training knobs for run_bias_gap. Defaults are sized so that the
// two networks fit their targets well and the gap sign is stable across seeds.
struct BiasGapConfig {
  std::size_t n_prompts = 8;
  std::size_t pairs_per_prompt = 4800;
  std::size_t dimension = 1;
  std::size_t eval_pairs_per_prompt = 60;
  std::size_t hidden = 16;
  std::size_t prompt_buckets = 0;  // 0 => n_prompts
  TrainConfig train;               // loss_kind/theta overwritten per run

  BiasGapConfig() {
    train.learning_rate = 3e-3;
    train.batch_size = 128;
    train.max_epochs = 200;
    // Minibatch noise makes the relative-improvement rule fire spuriously;
    // the experiment trains for its full epoch budget instead.
    train.convergence_tol = 0.0;
  }
};

// For each theta > 1: draw a tabular ground truth, generate a BTT-labeled
// dataset, derive its tie-broken version, train two identically-initialized
// MLP rewards (BTT loss on the tied data, BT loss on the tie-broken data),
// and evaluate both on freshly drawn pairs scored by the ground truth.
std::vector<BiasGapResult> run_bias_gap(std::span<const double> thetas,
                                        const BiasGapConfig& config,
                                        std::uint64_t seed);

// One row of the bias-curve table.
struct BiasCurveRow {
  double delta_r_star = 0.0;
  double theta = 0.0;
  double bias = 0.0;
  double bias_ratio = 0.0;  // bias / delta_r_star; limit -(th-1)^2/(th+1)^2 at 0
};

// Rows over an inclusive linspace of n_points strengths for each theta
// (theta-major order). The removable singularity of the ratio at zero is
// filled with its analytic limit.
std::vector<BiasCurveRow> emit_bias_curves(std::span<const double> thetas,
                                           double range_lo, double range_hi,
                                           std::size_t n_points);

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t n_used = 0;
  std::size_t n_ties_skipped = 0;
};

// Fraction of decided records whose winner-oriented model delta is positive;
// exact zeros earn half credit. Ties are filtered out and counted.
AccuracyResult eval_accuracy(const RewardModel& model,
                             const PreferenceDataset& dataset,
                             Exec exec = Exec::Parallel);

// Mean |delta(model) - delta(truth)| over pairs; labels are ignored.
double eval_mean_abs_bias(const RewardModel& model, const RewardModel& truth,
                          std::span<const ComparisonRecord> pairs,
                          Exec exec = Exec::Parallel);

// Returns a copy whose labels are the argmax of the truth's preference:
// FirstWins iff delta(truth, record) > 0 (ties in score go to FirstWins).
PreferenceDataset relabel_by_truth(const PreferenceDataset& dataset,
                                   const RewardModel& truth);

// Freshly drawn distinct response pairs (labels are placeholders).
std::vector<ComparisonRecord> draw_response_pairs(std::size_t n_prompts,
                                                  std::size_t pairs_per_prompt,
                                                  std::size_t dimension,
                                                  std::uint64_t seed);

// CSV emission with fixed column names.
void write_bias_gap_csv(std::span<const BiasGapResult> results,
                        std::ostream& out);
void write_bias_gap_csv(std::span<const BiasGapResult> results,
                        const std::filesystem::path& path);
void write_bias_curve_csv(std::span<const BiasCurveRow> rows, std::ostream& out);
void write_bias_curve_csv(std::span<const BiasCurveRow> rows,
                          const std::filesystem::path& path);

}  // namespace tiepref
