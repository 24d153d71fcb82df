#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tiepref/dataset.hpp"
#include "tiepref/parallel.hpp"
#include "tiepref/prefcore.hpp"
#include "tiepref/reward.hpp"

// The three negative-log-likelihood losses over a reward model, their exact
// parameter gradients, the RMSprop optimizer, and the minibatch training loop.
// Losses are dataset means (not sums), so learning rates transfer across
// dataset sizes. Batch kernels accept optional per-record weights — a
// weighted mean — which is what exact-expectation constructions use in tests.

namespace tiepref {

enum class LossKind { Bt, Btt, BiasCorrected };

// Whether the bias-correction offset contributes to the gradient. Detached
// treats the offset as a constant within each step (margin-logistic form).
// Both choices share the same stationary points.
enum class CorrectionGradient { Detached, Attached };

struct TrainConfig {
  LossKind loss_kind = LossKind::Bt;
  TieModelParams theta{1.0};
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::size_t max_epochs = 200;
  // Stop once |loss_prev - loss| / max(|loss_prev|, eps) drops below this.
  double convergence_tol = 1e-6;
  std::uint64_t seed = 0;
  CorrectionGradient correction_gradient = CorrectionGradient::Detached;
  Exec exec = Exec::Parallel;

  void validate() const;
};

// --- Batch kernels (weights empty => uniform mean) ---

double nll_bt(const RewardModel& model, std::span<const ComparisonRecord> records,
              std::span<const double> weights = {}, Exec exec = Exec::Parallel);

double nll_btt(const RewardModel& model, TieModelParams params,
               std::span<const ComparisonRecord> records,
               std::span<const double> weights = {}, Exec exec = Exec::Parallel);

// BT likelihood evaluated at the corrected strength d + bias_term(d, theta)
// per winner-oriented record: the model plays the true strength and the bias
// map predicts what tie-broken data would show for it. Reduces to nll_bt
// exactly at theta == 1.
double nll_bias_corrected(const RewardModel& model, TieModelParams params,
                          std::span<const ComparisonRecord> records,
                          std::span<const double> weights = {},
                          Exec exec = Exec::Parallel);

// Gradient of the (weighted-)mean loss w.r.t. psi; writes into grad
// (length model.param_count()) and returns the loss value of the same batch.
double loss_gradient(LossKind kind, const RewardModel& model,
                     TieModelParams params,
                     std::span<const ComparisonRecord> records,
                     std::span<const double> weights, std::span<double> grad,
                     CorrectionGradient correction = CorrectionGradient::Detached,
                     Exec exec = Exec::Parallel);

// --- Dataset-level entry points (validate label/theta compatibility) ---

double nll_bt(const RewardModel& model, const PreferenceDataset& dataset,
              Exec exec = Exec::Parallel);
double nll_btt(const RewardModel& model, TieModelParams params,
               const PreferenceDataset& dataset, Exec exec = Exec::Parallel);
double nll_bias_corrected(const RewardModel& model, TieModelParams params,
                          const PreferenceDataset& dataset,
                          Exec exec = Exec::Parallel);

// Throws ValidationError if the dataset is incompatible with the loss
// (ties under Bt/BiasCorrected; ties under Btt with theta == 1).
void require_compatible(LossKind kind, TieModelParams params,
                        std::span<const ComparisonRecord> records);

// --- RMSprop ---

struct RmspropState {
  std::vector<double> v;  // running mean of squared gradients
};

// v' = decay * v + (1 - decay) * grad^2 (elementwise);
// psi' = psi - lr * grad / (sqrt(v') + epsilon).
void rmsprop_step(std::span<double> psi, std::span<const double> grad,
                  RmspropState& state, const TrainConfig& config);

// --- Training loop ---

enum class StopReason { Converged, MaxEpochs };

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // mean L2 norm of batch gradients
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  StopReason stop_reason = StopReason::MaxEpochs;
  double final_loss = 0.0;
};

// Epochs of seeded-shuffled minibatches (final partial batch included) with
// RMSprop updates. Deterministic given config.seed. Throws TrainingError with
// the epoch index if the loss becomes non-finite.
TrainReport train(RewardModel& model, const PreferenceDataset& dataset,
                  const TrainConfig& config);

// Machine-readable report: "epoch loss grad_norm" per line. Wall time is
// carried in the in-memory report only, so the file is deterministic.
void write_report(const TrainReport& report, std::ostream& out);
void write_report(const TrainReport& report, const std::filesystem::path& path);

}  // namespace tiepref
