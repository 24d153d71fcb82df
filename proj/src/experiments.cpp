#include "tiepref/experiments.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "tiepref/format.hpp"
#include "tiepref/rng.hpp"

namespace tiepref {

std::vector<BiasGapResult> run_bias_gap(std::span<const double> thetas,
                                        const BiasGapConfig& config,
                                        std::uint64_t seed) {
  for (double th : thetas) {
    if (!(th > 1.0)) {
      throw InvalidParameterError(
          "bias-gap runs need theta > 1 so that ties occur, got " +
          format_double(th));
    }
  }
  const std::size_t buckets =
      config.prompt_buckets == 0 ? config.n_prompts : config.prompt_buckets;

  std::vector<BiasGapResult> results;
  results.reserve(thetas.size());
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const TieModelParams params(thetas[t]);
    const std::uint64_t run_seed = derive_seed(seed, "bias-gap", t);

    const TabularReward truth = random_ground_truth(
        config.dimension, config.n_prompts, derive_seed(run_seed, "truth"));
    const PreferenceDataset tied = generate_synthetic(
        config.n_prompts, config.pairs_per_prompt, config.dimension, truth,
        params, derive_seed(run_seed, "gen"), config.train.exec);
    const PreferenceDataset broken =
        break_ties(tied, derive_seed(run_seed, "tie-break"), config.train.exec);

    // Identical initialization for the two models, per construction from the
    // same seed and architecture.
    const std::uint64_t init_seed = derive_seed(run_seed, "init");
    MlpReward model_btt(config.dimension, config.hidden, buckets, init_seed);
    MlpReward model_bt(config.dimension, config.hidden, buckets, init_seed);

    TrainConfig cfg_btt = config.train;
    cfg_btt.loss_kind = LossKind::Btt;
    cfg_btt.theta = params;
    cfg_btt.seed = derive_seed(run_seed, "train-btt");
    train(model_btt, tied, cfg_btt);

    TrainConfig cfg_bt = config.train;
    cfg_bt.loss_kind = LossKind::Bt;
    cfg_bt.theta = TieModelParams(1.0);
    cfg_bt.seed = derive_seed(run_seed, "train-bt");
    train(model_bt, broken, cfg_bt);

    const auto eval_pairs = draw_response_pairs(
        config.n_prompts, config.eval_pairs_per_prompt, config.dimension,
        derive_seed(run_seed, "eval"));

    BiasGapResult row;
    row.theta = thetas[t];
    row.mean_abs_bias_bt =
        eval_mean_abs_bias(model_bt, truth, eval_pairs, config.train.exec);
    row.mean_abs_bias_btt =
        eval_mean_abs_bias(model_btt, truth, eval_pairs, config.train.exec);
    row.gap = row.mean_abs_bias_bt - row.mean_abs_bias_btt;
    row.n_eval_pairs = eval_pairs.size();
    row.seed = seed;
    results.push_back(row);
  }
  return results;
}

std::vector<BiasCurveRow> emit_bias_curves(std::span<const double> thetas,
                                           double range_lo, double range_hi,
                                           std::size_t n_points) {
  if (!(range_lo < range_hi)) {
    throw ContractError("bias curve range must satisfy lo < hi");
  }
  if (n_points < 2) throw ContractError("bias curves need n_points >= 2");

  std::vector<BiasCurveRow> rows;
  rows.reserve(thetas.size() * n_points);
  for (double th : thetas) {
    const TieModelParams params(th);
    // Slope of the bias at zero strength; fills the 0/0 ratio cell.
    // The trailing +0.0 keeps the theta = 1 zero unsigned.
    const double ratio_at_zero =
        -((th - 1.0) * (th - 1.0)) / ((th + 1.0) * (th + 1.0)) + 0.0;
    for (std::size_t i = 0; i < n_points; ++i) {
      const double x = range_lo + (range_hi - range_lo) *
                                      static_cast<double>(i) /
                                      static_cast<double>(n_points - 1);
      BiasCurveRow row;
      row.delta_r_star = x;
      row.theta = th;
      row.bias = bias_term(x, params);
      row.bias_ratio = std::abs(x) < 1e-12 ? ratio_at_zero
                       : row.bias == 0.0   ? 0.0
                                           : row.bias / x;
      rows.push_back(row);
    }
  }
  return rows;
}

AccuracyResult eval_accuracy(const RewardModel& model,
                             const PreferenceDataset& dataset, Exec exec) {
  std::vector<const ComparisonRecord*> decided;
  decided.reserve(dataset.records.size());
  std::size_t ties = 0;
  for (const auto& rec : dataset.records) {
    if (rec.label == PreferenceLabel::Tie) {
      ++ties;
    } else {
      decided.push_back(&rec);
    }
  }
  if (decided.empty()) {
    throw MetricError("accuracy is undefined: no decided records");
  }
  const double credit = indexed_sum(decided.size(), exec, [&](std::size_t i) {
    const ComparisonRecord& rec = *decided[i];
    const double s = rec.label == PreferenceLabel::FirstWins ? 1.0 : -1.0;
    const double d = s * delta(model, rec);
    if (d > 0.0) return 1.0;
    if (d == 0.0) return 0.5;
    return 0.0;
  });
  AccuracyResult out;
  out.n_used = decided.size();
  out.n_ties_skipped = ties;
  out.accuracy = credit / static_cast<double>(decided.size());
  return out;
}

double eval_mean_abs_bias(const RewardModel& model, const RewardModel& truth,
                          std::span<const ComparisonRecord> pairs, Exec exec) {
  if (pairs.empty()) {
    throw MetricError("mean absolute bias is undefined on an empty pair set");
  }
  const double sum = indexed_sum(pairs.size(), exec, [&](std::size_t i) {
    return std::abs(delta(model, pairs[i]) - delta(truth, pairs[i]));
  });
  return sum / static_cast<double>(pairs.size());
}

PreferenceDataset relabel_by_truth(const PreferenceDataset& dataset,
                                   const RewardModel& truth) {
  PreferenceDataset out = dataset;
  for (auto& rec : out.records) {
    rec.label = delta(truth, rec) > 0.0 ? PreferenceLabel::FirstWins
                                        : PreferenceLabel::SecondWins;
  }
  out.meta.n_ties = 0;
  out.meta.n_records = out.records.size();
  out.meta.theta.reset();  // labels are no longer BTT-sampled
  return out;
}

std::vector<ComparisonRecord> draw_response_pairs(std::size_t n_prompts,
                                                  std::size_t pairs_per_prompt,
                                                  std::size_t dimension,
                                                  std::uint64_t seed) {
  if (n_prompts < 1 || pairs_per_prompt < 1 || dimension < 1) {
    throw ContractError("pair drawing needs positive counts");
  }
  std::vector<ComparisonRecord> pairs;
  pairs.reserve(n_prompts * pairs_per_prompt);
  for (std::size_t p = 0; p < n_prompts; ++p) {
    for (std::size_t k = 0; k < pairs_per_prompt; ++k) {
      Rng rng = substream(seed, "eval-pair", p, k);
      ComparisonRecord rec;
      rec.prompt_id = static_cast<PromptId>(p);
      rec.response_a.prompt_id = rec.prompt_id;
      rec.response_b.prompt_id = rec.prompt_id;
      rec.response_a.features.resize(dimension);
      rec.response_b.features.resize(dimension);
      do {
        for (auto& f : rec.response_a.features) {
          f = static_cast<Feature>(rng.below(kFeatureCardinality));
        }
        for (auto& f : rec.response_b.features) {
          f = static_cast<Feature>(rng.below(kFeatureCardinality));
        }
      } while (rec.response_a.features == rec.response_b.features);
      pairs.push_back(std::move(rec));
    }
  }
  return pairs;
}

namespace {

void write_bias_gap_rows(std::span<const BiasGapResult> results,
                         std::ostream& out) {
  out << "theta,mean_abs_bias_bt,mean_abs_bias_btt,gap,n_eval_pairs,seed\n";
  for (const auto& r : results) {
    out << format_double(r.theta) << ',' << format_double(r.mean_abs_bias_bt)
        << ',' << format_double(r.mean_abs_bias_btt) << ','
        << format_double(r.gap) << ',' << r.n_eval_pairs << ',' << r.seed
        << "\n";
  }
}

void write_bias_curve_rows(std::span<const BiasCurveRow> rows,
                           std::ostream& out) {
  out << "delta_r_star,theta,bias,bias_ratio\n";
  for (const auto& r : rows) {
    out << format_double(r.delta_r_star) << ',' << format_double(r.theta)
        << ',' << format_double(r.bias) << ',' << format_double(r.bias_ratio)
        << "\n";
  }
}

}  // namespace

void write_bias_gap_csv(std::span<const BiasGapResult> results,
                        std::ostream& out) {
  write_bias_gap_rows(results, out);
}

void write_bias_gap_csv(std::span<const BiasGapResult> results,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_bias_gap_rows(results, out);
  if (!out) throw Error("failed while writing " + path.string());
}

void write_bias_curve_csv(std::span<const BiasCurveRow> rows,
                          std::ostream& out) {
  write_bias_curve_rows(rows, out);
}

void write_bias_curve_csv(std::span<const BiasCurveRow> rows,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_bias_curve_rows(rows, out);
  if (!out) throw Error("failed while writing " + path.string());
}

}  // namespace tiepref
