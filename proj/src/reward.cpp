#include "tiepref/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "tiepref/format.hpp"
#include "tiepref/rng.hpp"

namespace tiepref {

namespace {

constexpr std::size_t kMaxMaterializedGrid = std::size_t{1} << 18;

void check_features(std::span<const Feature> features) {
  for (Feature f : features) {
    if (f >= kFeatureCardinality) {
      throw DomainError("feature value outside {0,1,2,3}");
    }
  }
}

std::size_t grid_responses(std::size_t dimension) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < dimension; ++i) n *= kFeatureCardinality;
  return n;
}

// Canonical lexicographic feature vector of a grid cell index.
std::vector<Feature> grid_features(std::size_t cell, std::size_t dimension) {
  std::vector<Feature> fs(dimension);
  for (std::size_t j = dimension; j-- > 0;) {
    fs[j] = static_cast<Feature>(cell % kFeatureCardinality);
    cell /= kFeatureCardinality;
  }
  return fs;
}

double truth_entry(std::uint64_t seed, TabularReward::Key key) {
  Rng rng = substream(seed, "truth-entry", key);
  return rng.uniform(-2.0, 2.0);
}

void check_param_size(std::span<const double> psi, std::size_t expected) {
  if (psi.size() != expected) {
    throw ContractError("parameter vector has length " +
                        std::to_string(psi.size()) + ", expected " +
                        std::to_string(expected));
  }
}

}  // namespace

// --- TabularReward ---

TabularReward::Key TabularReward::encode_key(PromptId prompt,
                                             std::span<const Feature> features) {
  if (features.size() > kMaxDimension) {
    throw ContractError("tabular rewards support dimension <= 16");
  }
  check_features(features);
  std::uint64_t packed = 0;
  for (Feature f : features) packed = (packed << 2) | f;
  // Distinguish equal packings of different lengths.
  packed |= std::uint64_t{1} << (2 * features.size());
  return (static_cast<std::uint64_t>(prompt) << 33) ^ packed;
}

void TabularReward::set_entry(PromptId prompt, std::span<const Feature> features,
                              double value) {
  if (!std::isfinite(value)) throw DomainError("table entries must be finite");
  const Key key = encode_key(prompt, features);
  auto [it, inserted] = index_.try_emplace(key, psi_.size());
  if (inserted) {
    keys_.push_back(key);
    psi_.push_back(value);
  } else {
    psi_[it->second] = value;
  }
  grid_.reset();  // arbitrary edits invalidate the canonical-grid promise
}

void TabularReward::set_params(std::span<const double> psi) {
  check_param_size(psi, psi_.size());
  std::copy(psi.begin(), psi.end(), psi_.begin());
}

double TabularReward::score(PromptId prompt,
                            std::span<const Feature> features) const {
  const Key key = encode_key(prompt, features);
  if (const auto it = index_.find(key); it != index_.end()) {
    return psi_[it->second];
  }
  if (lazy_seed_) return truth_entry(*lazy_seed_, key);
  return 0.0;  // declared default for absent keys
}

void TabularReward::score_gradient(PromptId prompt,
                                   std::span<const Feature> features,
                                   std::span<double> grad) const {
  check_param_size(grad, psi_.size());
  std::fill(grad.begin(), grad.end(), 0.0);
  const Key key = encode_key(prompt, features);
  if (const auto it = index_.find(key); it != index_.end()) {
    grad[it->second] = 1.0;
  }
}

TabularReward grid_tabular(std::size_t dimension, std::size_t n_prompts) {
  if (dimension < 1 || n_prompts < 1) {
    throw ContractError("grid tables need dimension >= 1 and n_prompts >= 1");
  }
  TabularReward table;
  const std::size_t responses = grid_responses(dimension);
  for (std::size_t p = 0; p < n_prompts; ++p) {
    for (std::size_t c = 0; c < responses; ++c) {
      const auto fs = grid_features(c, dimension);
      table.set_entry(static_cast<PromptId>(p), fs, 0.0);
    }
  }
  table.grid_ = TabularReward::GridShape{n_prompts, dimension};
  return table;
}

TabularReward random_ground_truth(std::size_t dimension, std::size_t n_prompts,
                                  std::uint64_t seed) {
  if (dimension < 1 || n_prompts < 1) {
    throw ContractError("ground truth needs dimension >= 1 and n_prompts >= 1");
  }
  const std::size_t responses = grid_responses(dimension);
  TabularReward table;
  if (n_prompts <= kMaxMaterializedGrid / responses) {
    for (std::size_t p = 0; p < n_prompts; ++p) {
      for (std::size_t c = 0; c < responses; ++c) {
        const auto fs = grid_features(c, dimension);
        const auto key =
            TabularReward::encode_key(static_cast<PromptId>(p), fs);
        table.set_entry(static_cast<PromptId>(p), fs, truth_entry(seed, key));
      }
    }
    table.grid_ = TabularReward::GridShape{n_prompts, dimension};
  } else {
    table.lazy_seed_ = seed;
  }
  return table;
}

// --- LinearReward ---

LinearReward::LinearReward(std::size_t dimension, std::size_t n_prompts)
    : dimension_(dimension), n_prompts_(n_prompts),
      psi_(kFeatureCardinality * dimension + n_prompts, 0.0) {
  if (dimension < 1 || n_prompts < 1) {
    throw ContractError("linear rewards need dimension >= 1, n_prompts >= 1");
  }
}

void LinearReward::set_params(std::span<const double> psi) {
  check_param_size(psi, psi_.size());
  std::copy(psi.begin(), psi.end(), psi_.begin());
}

double LinearReward::score(PromptId prompt,
                           std::span<const Feature> features) const {
  if (features.size() != dimension_) {
    throw DomainError("feature length does not match linear reward dimension");
  }
  check_features(features);
  if (prompt >= n_prompts_) {
    throw DomainError("prompt " + std::to_string(prompt) +
                      " outside linear reward domain");
  }
  double s = psi_[kFeatureCardinality * dimension_ + prompt];
  for (std::size_t j = 0; j < dimension_; ++j) {
    s += psi_[kFeatureCardinality * j + features[j]];
  }
  return s;
}

void LinearReward::score_gradient(PromptId prompt,
                                  std::span<const Feature> features,
                                  std::span<double> grad) const {
  check_param_size(grad, psi_.size());
  if (features.size() != dimension_ || prompt >= n_prompts_) {
    throw DomainError("input outside linear reward domain");
  }
  check_features(features);
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t j = 0; j < dimension_; ++j) {
    grad[kFeatureCardinality * j + features[j]] = 1.0;
  }
  grad[kFeatureCardinality * dimension_ + prompt] = 1.0;
}

// --- MlpReward ---

MlpReward::MlpReward(std::size_t dimension, std::size_t hidden,
                     std::size_t prompt_buckets, std::uint64_t init_seed)
    : dimension_(dimension), hidden_(hidden), prompt_buckets_(prompt_buckets),
      input_dim_(prompt_buckets + kFeatureCardinality * dimension) {
  if (dimension < 1 || hidden < 1 || prompt_buckets < 1) {
    throw ContractError("MLP rewards need dimension, hidden, buckets >= 1");
  }
  psi_.resize(hidden_ * input_dim_ + hidden_ + hidden_ + 1);
  Rng rng = substream(init_seed, "mlp-init");
  for (double& w : psi_) w = rng.uniform(-0.1, 0.1);
}

void MlpReward::set_params(std::span<const double> psi) {
  check_param_size(psi, psi_.size());
  std::copy(psi.begin(), psi.end(), psi_.begin());
}

void MlpReward::active_inputs(PromptId prompt, std::span<const Feature> features,
                              std::vector<std::size_t>& out) const {
  if (features.size() != dimension_) {
    throw DomainError("feature length does not match MLP reward dimension");
  }
  check_features(features);
  out.clear();
  out.push_back(prompt % prompt_buckets_);
  for (std::size_t j = 0; j < dimension_; ++j) {
    out.push_back(prompt_buckets_ + kFeatureCardinality * j + features[j]);
  }
}

double MlpReward::score(PromptId prompt,
                        std::span<const Feature> features) const {
  std::vector<std::size_t> active;
  active_inputs(prompt, features, active);
  const double* w1 = psi_.data();
  const double* b1 = w1 + hidden_ * input_dim_;
  const double* w2 = b1 + hidden_;
  const double b2 = w2[hidden_];
  double out = b2;
  for (std::size_t i = 0; i < hidden_; ++i) {
    double pre = b1[i];
    const double* row = w1 + i * input_dim_;
    for (std::size_t a : active) pre += row[a];
    out += w2[i] * std::tanh(pre);
  }
  return out;
}

void MlpReward::score_gradient(PromptId prompt,
                               std::span<const Feature> features,
                               std::span<double> grad) const {
  check_param_size(grad, psi_.size());
  std::vector<std::size_t> active;
  active_inputs(prompt, features, active);
  std::fill(grad.begin(), grad.end(), 0.0);
  const double* w1 = psi_.data();
  const double* b1 = w1 + hidden_ * input_dim_;
  const double* w2 = b1 + hidden_;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + hidden_ * input_dim_;
  double* g_w2 = g_b1 + hidden_;
  double* g_b2 = g_w2 + hidden_;
  *g_b2 = 1.0;
  for (std::size_t i = 0; i < hidden_; ++i) {
    double pre = b1[i];
    const double* row = w1 + i * input_dim_;
    for (std::size_t a : active) pre += row[a];
    const double t = std::tanh(pre);
    g_w2[i] = t;
    const double back = w2[i] * (1.0 - t * t);
    g_b1[i] = back;
    double* g_row = g_w1 + i * input_dim_;
    for (std::size_t a : active) g_row[a] = back;
  }
}

// --- PolicyLogRatioReward ---

PolicyLogRatioReward::PolicyLogRatioReward(
    double beta,
    std::vector<std::pair<PromptId, std::vector<std::vector<Feature>>>> domain,
    std::vector<double> policy_values, std::vector<double> reference_values,
    bool normalize)
    : beta_(beta), psi_(std::move(policy_values)),
      reference_(std::move(reference_values)) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw InvalidParameterError("beta must be a positive real");
  }
  std::size_t total = 0;
  for (const auto& [prompt, responses] : domain) {
    if (responses.empty()) {
      throw ContractError("each prompt needs at least one response");
    }
    for (const auto& fs : responses) {
      const auto key = TabularReward::encode_key(prompt, fs);
      if (!index_.try_emplace(key, total).second) {
        throw ContractError("duplicate (prompt, response) in policy domain");
      }
      ++total;
    }
  }
  if (psi_.size() != total || reference_.size() != total) {
    throw ContractError("policy/reference tables must match the domain size");
  }

  // Per-prompt blocks are contiguous in the flattened order.
  std::size_t offset = 0;
  for (const auto& [prompt, responses] : domain) {
    const std::size_t n = responses.size();
    for (std::vector<double>* table : {&psi_, &reference_}) {
      std::span<double> block(table->data() + offset, n);
      if (normalize) {
        const double m = *std::max_element(block.begin(), block.end());
        double sum = 0.0;
        for (double v : block) sum += std::exp(v - m);
        const double lse = m + std::log(sum);
        for (double& v : block) v -= lse;
      } else {
        double m = block[0];
        for (double v : block) m = std::max(m, v);
        double sum = 0.0;
        for (double v : block) sum += std::exp(v - m);
        const double lse = m + std::log(sum);
        if (std::abs(lse) > 1e-9) {
          throw ValidationError(
              "log-probabilities of prompt " + std::to_string(prompt) +
              " do not normalize (logsumexp = " + format_double(lse) + ")");
        }
      }
    }
    offset += n;
  }
}

std::size_t PolicyLogRatioReward::entry_index(
    PromptId prompt, std::span<const Feature> features) const {
  const auto key = TabularReward::encode_key(prompt, features);
  const auto it = index_.find(key);
  if (it == index_.end()) {
    throw DomainError("(prompt, response) outside the policy domain");
  }
  return it->second;
}

void PolicyLogRatioReward::set_params(std::span<const double> psi) {
  check_param_size(psi, psi_.size());
  std::copy(psi.begin(), psi.end(), psi_.begin());
}

double PolicyLogRatioReward::score(PromptId prompt,
                                   std::span<const Feature> features) const {
  const std::size_t k = entry_index(prompt, features);
  return beta_ * (psi_[k] - reference_[k]);
}

void PolicyLogRatioReward::score_gradient(PromptId prompt,
                                          std::span<const Feature> features,
                                          std::span<double> grad) const {
  check_param_size(grad, psi_.size());
  const std::size_t k = entry_index(prompt, features);
  std::fill(grad.begin(), grad.end(), 0.0);
  grad[k] = beta_;
}

// --- Checkpoints ---

void save_checkpoint(const RewardModel& model,
                     const std::filesystem::path& path) {
  std::ostringstream header;
  header << "#meta kind=" << model.kind();
  if (model.kind() == "tabular") {
    const auto& table = dynamic_cast<const TabularReward&>(model);
    if (!table.grid_shape()) {
      throw ContractError(
          "only grid-materialized tabular rewards can be checkpointed");
    }
    header << " dim=" << table.grid_shape()->dimension
           << " prompts=" << table.grid_shape()->n_prompts;
  } else if (model.kind() == "linear") {
    const auto& linear = dynamic_cast<const LinearReward&>(model);
    header << " dim=" << linear.dimension() << " prompts=" << linear.n_prompts();
  } else if (model.kind() == "mlp") {
    const auto& mlp = dynamic_cast<const MlpReward&>(model);
    header << " dim=" << mlp.dimension() << " hidden=" << mlp.hidden()
           << " buckets=" << mlp.prompt_buckets();
  } else {
    throw ContractError("checkpointing is not supported for kind \"" +
                        std::string(model.kind()) + "\"");
  }
  header << " n_params=" << model.param_count();

  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << header.str() << "\n";
  for (double v : model.params()) out << format_double(v) << "\n";
  if (!out) throw Error("failed while writing " + path.string());
}

std::unique_ptr<RewardModel> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::string line;
  if (!std::getline(in, line) || line.rfind("#meta ", 0) != 0) {
    throw ParseError("checkpoint must start with \"#meta \"", 1);
  }
  std::istringstream header(line.substr(6));
  std::string kind;
  std::size_t dim = 0, prompts = 0, hidden = 0, buckets = 0, n_params = 0;
  std::string token;
  while (header >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw ParseError("malformed header token \"" + token + "\"", 1);
    }
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "kind") kind = value;
      else if (key == "dim") dim = std::stoull(value);
      else if (key == "prompts") prompts = std::stoull(value);
      else if (key == "hidden") hidden = std::stoull(value);
      else if (key == "buckets") buckets = std::stoull(value);
      else if (key == "n_params") n_params = std::stoull(value);
      else throw ParseError("unknown header key \"" + key + "\"", 1);
    } catch (const std::invalid_argument&) {
      throw ParseError("malformed header value \"" + token + "\"", 1);
    } catch (const std::out_of_range&) {
      throw ParseError("header value out of range \"" + token + "\"", 1);
    }
  }

  std::unique_ptr<RewardModel> model;
  if (kind == "tabular") {
    model = std::make_unique<TabularReward>(grid_tabular(dim, prompts));
  } else if (kind == "linear") {
    model = std::make_unique<LinearReward>(dim, prompts);
  } else if (kind == "mlp") {
    model = std::make_unique<MlpReward>(dim, hidden, buckets, 0);
  } else {
    throw ParseError("unsupported checkpoint kind \"" + kind + "\"", 1);
  }

  std::vector<double> psi;
  psi.reserve(n_params);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(line, &pos);
      if (pos != line.size()) throw std::invalid_argument(line);
      psi.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("malformed parameter value \"" + line + "\"", line_no);
    }
  }
  if (psi.size() != n_params || n_params != model->param_count()) {
    throw ValidationError(
        "checkpoint parameter count mismatch: header says " +
        std::to_string(n_params) + ", file has " + std::to_string(psi.size()) +
        ", model expects " + std::to_string(model->param_count()));
  }
  model->set_params(psi);
  return model;
}

}  // namespace tiepref
