#include "tiepref/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "tiepref/format.hpp"

namespace tiepref {

namespace {

// log(exp(a) + exp(b)) without overflow.
double logaddexp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Loss and d(loss)/d(delta) of one record, where delta = score(a) - score(b).
struct RecordTerms {
  double loss;
  double dloss_ddelta;
};

RecordTerms bt_terms(double dpsi, PreferenceLabel label) {
  const double s = label == PreferenceLabel::FirstWins ? 1.0 : -1.0;
  const double d = s * dpsi;  // winner-minus-loser strength
  return {neg_log_logistic(d), s * (logistic(d) - 1.0)};
}

RecordTerms btt_terms(double dpsi, PreferenceLabel label, TieModelParams params) {
  const double tau = std::log(params.theta);
  switch (label) {
    case PreferenceLabel::FirstWins:
      // p = sigma(delta - tau)
      return {neg_log_logistic(dpsi - tau), logistic(dpsi - tau) - 1.0};
    case PreferenceLabel::SecondWins:
      // p = sigma(-delta - tau)
      return {neg_log_logistic(-dpsi - tau), logistic(dpsi + tau)};
    case PreferenceLabel::Tie: {
      // p = (theta^2 - 1) e^{delta} / ((e^{delta} + theta)(theta e^{delta} + 1))
      const double th = params.theta;
      const double loss = -std::log(th * th - 1.0) - dpsi +
                          logaddexp(dpsi, tau) + logaddexp(dpsi + tau, 0.0);
      const double grad = logistic(dpsi - tau) + logistic(dpsi + tau) - 1.0;
      return {loss, grad};
    }
  }
  throw ContractError("invalid label enum value");
}

RecordTerms corrected_terms(double dpsi, PreferenceLabel label,
                            TieModelParams params,
                            CorrectionGradient correction) {
  const double s = label == PreferenceLabel::FirstWins ? 1.0 : -1.0;
  const double d = s * dpsi;
  const double offset = bias_term(d, params);  // the adaptive margin, <= 0 for d >= 0
  const double arg = d + offset;
  double dloss_dd = logistic(arg) - 1.0;
  if (correction == CorrectionGradient::Attached) {
    dloss_dd *= 1.0 + bias_term_derivative(d, params);
  }
  return {neg_log_logistic(arg), s * dloss_dd};
}

RecordTerms record_terms(LossKind kind, double dpsi, PreferenceLabel label,
                         TieModelParams params, CorrectionGradient correction) {
  switch (kind) {
    case LossKind::Bt: return bt_terms(dpsi, label);
    case LossKind::Btt: return btt_terms(dpsi, label, params);
    case LossKind::BiasCorrected:
      return corrected_terms(dpsi, label, params, correction);
  }
  throw ContractError("invalid loss kind");
}

double total_weight(std::span<const ComparisonRecord> records,
                    std::span<const double> weights) {
  if (weights.empty()) return static_cast<double>(records.size());
  if (weights.size() != records.size()) {
    throw ContractError("weights length does not match record count");
  }
  double w = 0.0;
  for (double x : weights) {
    if (!(x >= 0.0)) throw ContractError("record weights must be >= 0");
    w += x;
  }
  if (w <= 0.0) throw ContractError("record weights must not all be zero");
  return w;
}

double mean_loss(LossKind kind, const RewardModel& model, TieModelParams params,
                 std::span<const ComparisonRecord> records,
                 std::span<const double> weights, CorrectionGradient correction,
                 Exec exec) {
  require_compatible(kind, params, records);
  if (records.empty()) throw ContractError("loss of an empty record set");
  const double w_total = total_weight(records, weights);
  const double sum = indexed_sum(records.size(), exec, [&](std::size_t i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double dpsi = delta(model, records[i]);
    return w * record_terms(kind, dpsi, records[i].label, params, correction).loss;
  });
  return sum / w_total;
}

}  // namespace

void require_compatible(LossKind kind, TieModelParams params,
                        std::span<const ComparisonRecord> records) {
  std::size_t ties = 0;
  for (const auto& rec : records) ties += (rec.label == PreferenceLabel::Tie);
  if (ties == 0) return;
  if (kind == LossKind::Bt || kind == LossKind::BiasCorrected) {
    throw ValidationError(
        "this loss needs a tie-free dataset; found " + std::to_string(ties) +
        " tie record(s) — break ties first or use the BTT loss");
  }
  if (params.theta == 1.0) {
    throw ValidationError(
        "theta = 1 assigns ties probability zero; the BTT likelihood of " +
        std::to_string(ties) + " tie record(s) is infinite");
  }
}

double nll_bt(const RewardModel& model, std::span<const ComparisonRecord> records,
              std::span<const double> weights, Exec exec) {
  return mean_loss(LossKind::Bt, model, TieModelParams(1.0), records, weights,
                   CorrectionGradient::Detached, exec);
}

double nll_btt(const RewardModel& model, TieModelParams params,
               std::span<const ComparisonRecord> records,
               std::span<const double> weights, Exec exec) {
  return mean_loss(LossKind::Btt, model, params, records, weights,
                   CorrectionGradient::Detached, exec);
}

double nll_bias_corrected(const RewardModel& model, TieModelParams params,
                          std::span<const ComparisonRecord> records,
                          std::span<const double> weights, Exec exec) {
  return mean_loss(LossKind::BiasCorrected, model, params, records, weights,
                   CorrectionGradient::Detached, exec);
}

double nll_bt(const RewardModel& model, const PreferenceDataset& dataset,
              Exec exec) {
  return nll_bt(model, dataset.records, {}, exec);
}

double nll_btt(const RewardModel& model, TieModelParams params,
               const PreferenceDataset& dataset, Exec exec) {
  return nll_btt(model, params, dataset.records, {}, exec);
}

double nll_bias_corrected(const RewardModel& model, TieModelParams params,
                          const PreferenceDataset& dataset, Exec exec) {
  return nll_bias_corrected(model, params, dataset.records, {}, exec);
}

double loss_gradient(LossKind kind, const RewardModel& model,
                     TieModelParams params,
                     std::span<const ComparisonRecord> records,
                     std::span<const double> weights, std::span<double> grad,
                     CorrectionGradient correction, Exec exec) {
  require_compatible(kind, params, records);
  if (records.empty()) throw ContractError("gradient of an empty record set");
  const std::size_t dim = model.param_count();
  if (grad.size() != dim) {
    throw ContractError("gradient buffer has wrong length");
  }
  const double w_total = total_weight(records, weights);

  std::vector<double> losses(records.size());
  indexed_accumulate(
      records.size(), dim, exec, grad,
      [&](std::size_t i, std::span<double> acc) {
        thread_local std::vector<double> ga, gb;
        ga.resize(dim);
        gb.resize(dim);
        const auto& rec = records[i];
        const double w = weights.empty() ? 1.0 : weights[i];
        const double dpsi = delta(model, rec);
        const RecordTerms t =
            record_terms(kind, dpsi, rec.label, params, correction);
        losses[i] = w * t.loss;
        model.score_gradient(rec.response_a.prompt_id, rec.response_a.features,
                             ga);
        model.score_gradient(rec.response_b.prompt_id, rec.response_b.features,
                             gb);
        const double c = w * t.dloss_ddelta;
        for (std::size_t j = 0; j < dim; ++j) acc[j] += c * (ga[j] - gb[j]);
      });

  for (double& g : grad) g /= w_total;
  const double loss_sum =
      indexed_sum(records.size(), Exec::Serial, [&](std::size_t i) { return losses[i]; });
  return loss_sum / w_total;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ContractError("learning rate must be a finite non-negative real");
  }
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) {
    throw ContractError("rmsprop decay must lie in (0, 1)");
  }
  if (!(rmsprop_epsilon > 0.0)) {
    throw ContractError("rmsprop epsilon must be positive");
  }
  if (max_epochs < 1) throw ContractError("max epochs must be >= 1");
  if (!(convergence_tol >= 0.0)) {
    throw ContractError("convergence tolerance must be >= 0");
  }
}

void rmsprop_step(std::span<double> psi, std::span<const double> grad,
                  RmspropState& state, const TrainConfig& config) {
  if (psi.size() != grad.size()) {
    throw ContractError("parameter/gradient shape mismatch in rmsprop_step");
  }
  if (state.v.empty()) state.v.assign(psi.size(), 0.0);
  if (state.v.size() != psi.size()) {
    throw ContractError("rmsprop state shape mismatch");
  }
  const double decay = config.rmsprop_decay;
  for (std::size_t j = 0; j < psi.size(); ++j) {
    state.v[j] = decay * state.v[j] + (1.0 - decay) * grad[j] * grad[j];
    psi[j] -= config.learning_rate * grad[j] /
              (std::sqrt(state.v[j]) + config.rmsprop_epsilon);
  }
}

TrainReport train(RewardModel& model, const PreferenceDataset& dataset,
                  const TrainConfig& config) {
  config.validate();
  require_compatible(config.loss_kind, config.theta, dataset.records);
  if (dataset.records.empty()) {
    throw ContractError("cannot train on an empty dataset");
  }

  const std::size_t n = dataset.records.size();
  const std::size_t dim = model.param_count();
  std::vector<double> psi(model.params().begin(), model.params().end());
  std::vector<double> grad(dim, 0.0);
  std::vector<ComparisonRecord> batch;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RmspropState state;

  TrainReport report;
  double prev_loss = 0.0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = substream(config.seed, "shuffle", epoch);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    double loss_sum = 0.0;
    double grad_norm_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(dataset.records[order[i]]);
      }
      const double batch_loss = loss_gradient(
          config.loss_kind, model, config.theta, batch, {}, grad,
          config.correction_gradient, config.exec);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("training loss became non-finite", epoch);
      }
      loss_sum += batch_loss * static_cast<double>(batch.size());
      double g2 = 0.0;
      for (double g : grad) g2 += g * g;
      grad_norm_sum += std::sqrt(g2);
      ++n_batches;
      rmsprop_step(psi, grad, state, config);
      model.set_params(psi);
    }

    const auto t1 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(n);
    stats.grad_norm = grad_norm_sum / static_cast<double>(n_batches);
    stats.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    report.epochs.push_back(stats);

    if (epoch > 0) {
      const double rel = std::abs(prev_loss - stats.loss) /
                         std::max(std::abs(prev_loss), 1e-300);
      if (rel < config.convergence_tol) {
        report.stop_reason = StopReason::Converged;
        report.final_loss = stats.loss;
        return report;
      }
    }
    prev_loss = stats.loss;
  }
  report.stop_reason = StopReason::MaxEpochs;
  report.final_loss = report.epochs.back().loss;
  return report;
}

void write_report(const TrainReport& report, std::ostream& out) {
  out << "# epoch loss grad_norm\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ' ' << format_double(e.loss) << ' '
        << format_double(e.grad_norm) << "\n";
  }
  out << "# stop="
      << (report.stop_reason == StopReason::Converged ? "converged"
                                                      : "max_epochs")
      << " final_loss=" << format_double(report.final_loss) << "\n";
}

void write_report(const TrainReport& report,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_report(report, out);
  if (!out) throw Error("failed while writing " + path.string());
}

}  // namespace tiepref
