#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tiepref/dataset.hpp"

// Pluggable reward parameterizations r_psi(prompt, response) with analytic
// gradients of the score with respect to the flat parameter vector psi.

namespace tiepref {

class RewardModel {
 public:
  virtual ~RewardModel() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual std::span<const double> params() const = 0;
  virtual void set_params(std::span<const double> psi) = 0;

  virtual double score(PromptId prompt,
                       std::span<const Feature> features) const = 0;

  // Writes d score / d psi into grad (length param_count), overwriting it.
  virtual void score_gradient(PromptId prompt, std::span<const Feature> features,
                              std::span<double> grad) const = 0;
};

inline double score(const RewardModel& model, const ResponseVector& response) {
  return model.score(response.prompt_id, response.features);
}

// Preference strength of a record: score(response_a) - score(response_b).
inline PreferenceStrength delta(const RewardModel& model,
                                const ComparisonRecord& record) {
  return score(model, record.response_a) - score(model, record.response_b);
}

// Exact lookup table over (prompt, features) keys; absent keys score 0.
// A table may carry a lazy hash-backed ground truth (see
// random_ground_truth), in which case it has no trainable parameters.
class TabularReward final : public RewardModel {
 public:
  using Key = std::uint64_t;
  static constexpr std::size_t kMaxDimension = 16;  // keys pack 2 bits/feature

  static Key encode_key(PromptId prompt, std::span<const Feature> features);

  TabularReward() = default;

  // Adds a key with the given value; replaces the value if already present.
  void set_entry(PromptId prompt, std::span<const Feature> features,
                 double value);

  std::string_view kind() const override { return "tabular"; }
  std::size_t param_count() const override { return psi_.size(); }
  std::span<const double> params() const override { return psi_; }
  void set_params(std::span<const double> psi) override;
  double score(PromptId prompt, std::span<const Feature> features) const override;
  void score_gradient(PromptId prompt, std::span<const Feature> features,
                      std::span<double> grad) const override;

  // Shape of a canonical full grid (prompt-major, responses in lexicographic
  // feature order); set for grid-materialized tables so they can be
  // checkpointed with an implicit key order.
  struct GridShape {
    std::size_t n_prompts = 0;
    std::size_t dimension = 0;
  };
  const std::optional<GridShape>& grid_shape() const { return grid_; }

  friend TabularReward random_ground_truth(std::size_t dimension,
                                           std::size_t n_prompts,
                                           std::uint64_t seed);
  friend TabularReward grid_tabular(std::size_t dimension,
                                    std::size_t n_prompts);

 private:
  std::vector<Key> keys_;
  std::vector<double> psi_;
  std::unordered_map<Key, std::size_t> index_;
  std::optional<GridShape> grid_;
  // Lazy ground-truth backing: absent keys score a value derived from
  // (lazy_seed_, key) instead of 0.
  std::optional<std::uint64_t> lazy_seed_;
};

// A zero-valued tabular model over the full (n_prompts x 4^dimension) grid.
TabularReward grid_tabular(std::size_t dimension, std::size_t n_prompts);

// Ground-truth reward with i.i.d. Uniform[-2, 2] entries, one per grid cell,
// each derived from (seed, key). The full grid is materialized when it has at
// most 2^18 entries; larger grids are backed lazily by the same derivation,
// so scores are identical either way.
TabularReward random_ground_truth(std::size_t dimension, std::size_t n_prompts,
                                  std::uint64_t seed);

// Linear score: one weight per (feature position, feature value) one-hot cell
// plus one offset per prompt.
class LinearReward final : public RewardModel {
 public:
  LinearReward(std::size_t dimension, std::size_t n_prompts);

  std::string_view kind() const override { return "linear"; }
  std::size_t param_count() const override { return psi_.size(); }
  std::span<const double> params() const override { return psi_; }
  void set_params(std::span<const double> psi) override;
  double score(PromptId prompt, std::span<const Feature> features) const override;
  void score_gradient(PromptId prompt, std::span<const Feature> features,
                      std::span<double> grad) const override;

  std::size_t dimension() const { return dimension_; }
  std::size_t n_prompts() const { return n_prompts_; }

 private:
  std::size_t dimension_;
  std::size_t n_prompts_;
  std::vector<double> psi_;  // [4 * dimension weights][n_prompts offsets]
};

// One hidden tanh layer over the concatenated one-hot encoding of
// (prompt_id mod prompt_buckets, features), scalar linear output.
// Parameters are initialized Uniform[-0.1, 0.1] from the given seed.
class MlpReward final : public RewardModel {
 public:
  MlpReward(std::size_t dimension, std::size_t hidden,
            std::size_t prompt_buckets, std::uint64_t init_seed);

  std::string_view kind() const override { return "mlp"; }
  std::size_t param_count() const override { return psi_.size(); }
  std::span<const double> params() const override { return psi_; }
  void set_params(std::span<const double> psi) override;
  double score(PromptId prompt, std::span<const Feature> features) const override;
  void score_gradient(PromptId prompt, std::span<const Feature> features,
                      std::span<double> grad) const override;

  std::size_t dimension() const { return dimension_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t prompt_buckets() const { return prompt_buckets_; }

 private:
  // Collects the active one-hot input indices (1 + dimension of them).
  void active_inputs(PromptId prompt, std::span<const Feature> features,
                     std::vector<std::size_t>& out) const;

  std::size_t dimension_;
  std::size_t hidden_;
  std::size_t prompt_buckets_;
  std::size_t input_dim_;  // prompt_buckets + 4 * dimension
  // psi layout: W1 (hidden x input_dim, row-major), b1, w2, b2.
  std::vector<double> psi_;
};

// Implicit reward of a toy tabular policy pair:
//   score = beta * (log pi(response | prompt) - log pi_ref(response | prompt)).
// Trainable parameters are the policy log-probabilities; the reference table
// is frozen. Per-prompt log-probabilities of both tables must normalize
// (logsumexp == 0 within 1e-9) at construction; training moves the policy
// entries freely afterwards, which only ever shifts per-prompt constants that
// cancel in every score difference.
class PolicyLogRatioReward final : public RewardModel {
 public:
  // domain: for each prompt, its list of candidate responses.
  // policy/reference values align with the flattened (prompt, response)
  // order of `domain`. With normalize == true the values are arbitrary
  // logits and a per-prompt log-softmax is applied to both tables.
  PolicyLogRatioReward(
      double beta,
      std::vector<std::pair<PromptId, std::vector<std::vector<Feature>>>> domain,
      std::vector<double> policy_values, std::vector<double> reference_values,
      bool normalize);

  std::string_view kind() const override { return "policy_log_ratio"; }
  std::size_t param_count() const override { return psi_.size(); }
  std::span<const double> params() const override { return psi_; }
  void set_params(std::span<const double> psi) override;
  double score(PromptId prompt, std::span<const Feature> features) const override;
  void score_gradient(PromptId prompt, std::span<const Feature> features,
                      std::span<double> grad) const override;

  double beta() const { return beta_; }

 private:
  std::size_t entry_index(PromptId prompt,
                          std::span<const Feature> features) const;

  double beta_;
  std::vector<double> psi_;        // policy log-probabilities
  std::vector<double> reference_;  // frozen
  std::unordered_map<TabularReward::Key, std::size_t> index_;
};

// Checkpoint format: "#meta kind=<k> ... n_params=<n>" header, then one real
// per line. Supported kinds: tabular (grid-materialized only), linear, mlp.
void save_checkpoint(const RewardModel& model,
                     const std::filesystem::path& path);
std::unique_ptr<RewardModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace tiepref
