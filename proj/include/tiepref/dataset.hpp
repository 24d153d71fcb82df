#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tiepref/parallel.hpp"
#include "tiepref/prefcore.hpp"
#include "tiepref/rng.hpp"

// Preference data with and without ties: record types, synthetic generation
// under the BTT model, uniform tie-breaking, and a line-delimited text codec.

namespace tiepref {

class RewardModel;

using PromptId = std::uint32_t;
using Feature = std::uint8_t;  // each feature value is in {0, 1, 2, 3}

inline constexpr Feature kFeatureCardinality = 4;

enum class PreferenceLabel : std::uint8_t { FirstWins, SecondWins, Tie };

// One response: a prompt index and a fixed-length feature vector.
struct ResponseVector {
  PromptId prompt_id = 0;
  std::vector<Feature> features;

  bool operator==(const ResponseVector&) const = default;
};

// One labeled comparison between two distinct responses to the same prompt.
struct ComparisonRecord {
  PromptId prompt_id = 0;
  ResponseVector response_a;
  ResponseVector response_b;
  PreferenceLabel label = PreferenceLabel::FirstWins;

  bool operator==(const ComparisonRecord&) const = default;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::optional<double> theta;  // tie parameter used for labeling, if any
  std::size_t n_records = 0;
  std::size_t n_ties = 0;

  bool operator==(const DatasetMeta&) const = default;
};

// An ordered collection of comparison records. Records with a decided label
// form the D^BT subset, tied records form D^T; the two partition the dataset.
struct PreferenceDataset {
  std::size_t dimension = 0;
  DatasetMeta meta;
  std::vector<ComparisonRecord> records;

  std::size_t count_ties() const;
  std::size_t count_decided() const { return records.size() - count_ties(); }

  // Checks every structural invariant (feature ranges, lengths, prompt
  // consistency, distinct responses, metadata counts). Throws ValidationError.
  void validate() const;

  bool operator==(const PreferenceDataset&) const = default;
};

// Draws one three-way label. A single uniform draw is compared against
// cumulative thresholds in the fixed order (win, lose, tie); the lose
// threshold is computed as 1 - p_tie so theta == 1 can never emit a tie.
PreferenceLabel sample_label(double r_a, double r_b, TieModelParams params,
                             Rng& rng);

// Relabels every tie as FirstWins/SecondWins with probability 1/2 each,
// independently per record (derived stream per record index). Decided records
// and record order pass through unchanged.
PreferenceDataset break_ties(const PreferenceDataset& dataset,
                             std::uint64_t seed, Exec exec = Exec::Parallel);

// Generates n_prompts * pairs_per_prompt records: distinct response pairs
// drawn uniformly over {0,1,2,3}^dimension per prompt, scored by `reward`,
// labeled under BTT(theta). Each (prompt, pair) slot uses its own derived
// substreams, so generation shards by prompt without changing any draw.
PreferenceDataset generate_synthetic(std::size_t n_prompts,
                                     std::size_t pairs_per_prompt,
                                     std::size_t dimension,
                                     const RewardModel& reward,
                                     TieModelParams params, std::uint64_t seed,
                                     Exec exec = Exec::Parallel);

// Line-delimited text codec. First line:
//   #meta seed=<u64> [theta=<real>] dimension=<n> n_records=<n> n_ties=<n>
// then one record per line as a flat JSON object with keys prompt_id,
// response_a, response_b, label ("first" | "second" | "tie").
// read_records(write_records(d)) == d exactly.
void write_records(const PreferenceDataset& dataset, std::ostream& out);
void write_records(const PreferenceDataset& dataset,
                   const std::filesystem::path& path);
PreferenceDataset read_records(std::istream& in);
PreferenceDataset read_records(const std::filesystem::path& path);

}  // namespace tiepref
