#include "tiepref/dataset.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "tiepref/format.hpp"
#include "tiepref/reward.hpp"

namespace tiepref {

namespace {

constexpr std::size_t kMaxPairDrawAttempts = 10000;

void check_record(const ComparisonRecord& rec, std::size_t dimension,
                  std::size_t index) {
  const auto where = " (record " + std::to_string(index) + ")";
  for (const ResponseVector* side : {&rec.response_a, &rec.response_b}) {
    if (side->features.size() != dimension) {
      throw ValidationError("feature length " +
                            std::to_string(side->features.size()) +
                            " does not match dataset dimension " +
                            std::to_string(dimension) + where);
    }
    for (Feature f : side->features) {
      if (f >= kFeatureCardinality) {
        throw ValidationError("feature value " + std::to_string(int(f)) +
                              " outside {0,1,2,3}" + where);
      }
    }
    if (side->prompt_id != rec.prompt_id) {
      throw ValidationError("response prompt_id disagrees with record" + where);
    }
  }
  if (rec.response_a.features == rec.response_b.features) {
    throw ValidationError("responses must differ feature-wise" + where);
  }
}

}  // namespace

std::size_t PreferenceDataset::count_ties() const {
  std::size_t n = 0;
  for (const auto& rec : records) n += (rec.label == PreferenceLabel::Tie);
  return n;
}

void PreferenceDataset::validate() const {
  if (dimension < 1) throw ValidationError("dataset dimension must be >= 1");
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], dimension, i);
  }
  if (meta.n_records != records.size()) {
    throw ValidationError("metadata n_records=" + std::to_string(meta.n_records) +
                          " but dataset holds " + std::to_string(records.size()));
  }
  const std::size_t ties = count_ties();
  if (meta.n_ties != ties) {
    throw ValidationError("metadata n_ties=" + std::to_string(meta.n_ties) +
                          " but dataset holds " + std::to_string(ties));
  }
}

PreferenceLabel sample_label(double r_a, double r_b, TieModelParams params,
                             Rng& rng) {
  const double p_win = btt_win_prob(r_a, r_b, params);
  const double p_tie = btt_tie_prob(r_a, r_b, params);
  const double u = rng.uniform01();
  if (u < p_win) return PreferenceLabel::FirstWins;
  if (u < 1.0 - p_tie) return PreferenceLabel::SecondWins;
  return PreferenceLabel::Tie;
}

PreferenceDataset break_ties(const PreferenceDataset& dataset,
                             std::uint64_t seed, Exec exec) {
  PreferenceDataset out = dataset;
  const std::size_t n = out.records.size();
  const std::size_t n_chunks = n == 0 ? 0 : (n - 1) / kReductionChunk + 1;
  detail::for_each_chunk(n_chunks, exec, [&](std::size_t c) {
    const std::size_t lo = c * kReductionChunk;
    const std::size_t hi = std::min(n, lo + kReductionChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      ComparisonRecord& rec = out.records[i];
      if (rec.label != PreferenceLabel::Tie) continue;
      Rng rng = substream(seed, "tie-break", i);
      rec.label = rng.uniform01() < 0.5 ? PreferenceLabel::FirstWins
                                        : PreferenceLabel::SecondWins;
    }
  });
  out.meta.n_ties = 0;
  return out;
}

PreferenceDataset generate_synthetic(std::size_t n_prompts,
                                     std::size_t pairs_per_prompt,
                                     std::size_t dimension,
                                     const RewardModel& reward,
                                     TieModelParams params, std::uint64_t seed,
                                     Exec exec) {
  if (n_prompts < 1 || pairs_per_prompt < 1) {
    throw ContractError("prompt and pair counts must be >= 1");
  }
  if (dimension < 1) {
    throw GenerationError(
        "dimension must be >= 1 so that distinct response pairs exist");
  }
  PreferenceDataset out;
  out.dimension = dimension;
  out.records.resize(n_prompts * pairs_per_prompt);

  detail::for_each_chunk(n_prompts, exec, [&](std::size_t p) {
    const auto prompt = static_cast<PromptId>(p);
    for (std::size_t k = 0; k < pairs_per_prompt; ++k) {
      Rng pair_rng = substream(seed, "pair-draw", p, k);
      ComparisonRecord rec;
      rec.prompt_id = prompt;
      rec.response_a.prompt_id = prompt;
      rec.response_b.prompt_id = prompt;
      rec.response_a.features.resize(dimension);
      rec.response_b.features.resize(dimension);
      std::size_t attempts = 0;
      do {
        if (++attempts > kMaxPairDrawAttempts) {
          throw GenerationError(
              "could not draw distinct responses for prompt " +
              std::to_string(prompt));
        }
        for (auto& f : rec.response_a.features) {
          f = static_cast<Feature>(pair_rng.below(kFeatureCardinality));
        }
        for (auto& f : rec.response_b.features) {
          f = static_cast<Feature>(pair_rng.below(kFeatureCardinality));
        }
      } while (rec.response_a.features == rec.response_b.features);

      const double r_a = reward.score(prompt, rec.response_a.features);
      const double r_b = reward.score(prompt, rec.response_b.features);
      Rng label_rng = substream(seed, "label-draw", p, k);
      rec.label = sample_label(r_a, r_b, params, label_rng);
      out.records[p * pairs_per_prompt + k] = std::move(rec);
    }
  });

  out.meta.seed = seed;
  out.meta.theta = params.theta;
  out.meta.n_records = out.records.size();
  out.meta.n_ties = out.count_ties();
  return out;
}

namespace {

std::string_view label_name(PreferenceLabel label) {
  switch (label) {
    case PreferenceLabel::FirstWins: return "first";
    case PreferenceLabel::SecondWins: return "second";
    case PreferenceLabel::Tie: return "tie";
  }
  throw ContractError("invalid label enum value");
}

PreferenceLabel label_from_name(std::string_view name, std::size_t line) {
  if (name == "first") return PreferenceLabel::FirstWins;
  if (name == "second") return PreferenceLabel::SecondWins;
  if (name == "tie") return PreferenceLabel::Tie;
  throw ParseError("unknown label \"" + std::string(name) + "\"", line);
}

nlohmann::ordered_json features_to_json(const std::vector<Feature>& fs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Feature f : fs) arr.push_back(static_cast<int>(f));
  return arr;
}

std::vector<Feature> features_from_json(const nlohmann::json& arr,
                                        std::size_t line) {
  if (!arr.is_array()) throw ParseError("response must be an array", line);
  std::vector<Feature> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_integer()) {
      throw ParseError("feature values must be integers", line);
    }
    const auto x = v.get<long long>();
    if (x < 0 || x >= kFeatureCardinality) {
      throw ParseError("feature value " + std::to_string(x) +
                       " outside {0,1,2,3}", line);
    }
    out.push_back(static_cast<Feature>(x));
  }
  return out;
}

}  // namespace

void write_records(const PreferenceDataset& dataset, std::ostream& out) {
  out << "#meta seed=" << dataset.meta.seed;
  if (dataset.meta.theta.has_value()) {
    out << " theta=" << format_double(*dataset.meta.theta);
  }
  out << " dimension=" << dataset.dimension
      << " n_records=" << dataset.meta.n_records
      << " n_ties=" << dataset.meta.n_ties << "\n";
  for (const auto& rec : dataset.records) {
    nlohmann::ordered_json obj;
    obj["prompt_id"] = rec.prompt_id;
    obj["response_a"] = features_to_json(rec.response_a.features);
    obj["response_b"] = features_to_json(rec.response_b.features);
    obj["label"] = label_name(rec.label);
    out << obj.dump() << "\n";
  }
}

void write_records(const PreferenceDataset& dataset,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_records(dataset, out);
  if (!out) throw Error("failed while writing " + path.string());
}

PreferenceDataset read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing #meta header", 1);
  constexpr std::string_view kPrefix = "#meta ";
  if (line.rfind(kPrefix, 0) != 0) {
    throw ParseError("first line must start with \"#meta \"", 1);
  }

  PreferenceDataset dataset;
  bool saw_dimension = false, saw_records = false, saw_ties = false;
  std::istringstream header(line.substr(kPrefix.size()));
  std::string token;
  while (header >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw ParseError("malformed header token \"" + token + "\"", 1);
    }
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "seed") {
        dataset.meta.seed = std::stoull(value);
      } else if (key == "theta") {
        dataset.meta.theta = std::stod(value);
      } else if (key == "dimension") {
        dataset.dimension = std::stoull(value);
        saw_dimension = true;
      } else if (key == "n_records") {
        dataset.meta.n_records = std::stoull(value);
        saw_records = true;
      } else if (key == "n_ties") {
        dataset.meta.n_ties = std::stoull(value);
        saw_ties = true;
      } else {
        throw ParseError("unknown header key \"" + key + "\"", 1);
      }
    } catch (const std::invalid_argument&) {
      throw ParseError("malformed header value \"" + token + "\"", 1);
    } catch (const std::out_of_range&) {
      throw ParseError("header value out of range \"" + token + "\"", 1);
    }
  }
  if (!saw_dimension || !saw_records || !saw_ties) {
    throw ParseError("header must carry dimension, n_records and n_ties", 1);
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid record JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("prompt_id") ||
        !obj.contains("response_a") || !obj.contains("response_b") ||
        !obj.contains("label")) {
      throw ParseError(
          "record must carry prompt_id, response_a, response_b, label",
          line_no);
    }
    if (!obj["prompt_id"].is_number_integer() ||
        obj["prompt_id"].get<long long>() < 0) {
      throw ParseError("prompt_id must be a non-negative integer", line_no);
    }
    if (!obj["label"].is_string()) {
      throw ParseError("label must be a string", line_no);
    }
    ComparisonRecord rec;
    rec.prompt_id = obj["prompt_id"].get<PromptId>();
    rec.response_a = {rec.prompt_id, features_from_json(obj["response_a"], line_no)};
    rec.response_b = {rec.prompt_id, features_from_json(obj["response_b"], line_no)};
    rec.label = label_from_name(obj["label"].get<std::string>(), line_no);
    if (rec.response_a.features.size() != dataset.dimension ||
        rec.response_b.features.size() != dataset.dimension) {
      throw ValidationError("record dimension mismatch at line " +
                            std::to_string(line_no) + ": expected " +
                            std::to_string(dataset.dimension));
    }
    dataset.records.push_back(std::move(rec));
  }

  dataset.validate();
  return dataset;
}

PreferenceDataset read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return read_records(in);
}

}  // namespace tiepref
