#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace augmentor {

enum class Source { kHuman, kSynthetic };
enum class Phase { kPredict, kExplain };
// Which human set a record belongs to. Synthetic records always go to a pool.
enum class Split { kTrain, kValidation };

std::string_view to_string(Source s);
std::string_view to_string(Phase p);
std::string_view to_string(Split s);

// One text sample. Label 1 is the desired (rubric-adequate) class.
struct LabeledResponse {
  std::string id;
  std::string text;
  int label = 0;
  Source source = Source::kHuman;
  std::optional<Phase> phase;
  std::optional<double> temperature;  // present iff source is synthetic
  std::optional<bool> consistent;     // set once self-graded; synthetic only

  bool operator==(const LabeledResponse&) const = default;
};

using Pool = std::vector<LabeledResponse>;

// Throws MalformedRecord naming the violated invariant.
void validate(const LabeledResponse& r);

struct Corpus {
  Pool human_train;
  Pool validation;
  std::map<double, Pool> synthetic_pools;

  bool operator==(const Corpus&) const = default;
};

// Checks cross-set invariants: unique ids, human-only validation, pool
// temperatures matching their key.
void validate(const Corpus& corpus);

enum class CorpusFormat { kJsonl, kCsv };

// Loads human and synthetic records from one file. Human records carry an
// optional "split" field (train by default). Records without an id get
// "<source>-<counter>". Errors carry 1-based row numbers.
Corpus load_corpus(const std::string& path, CorpusFormat format);
Corpus load_corpus(const std::string& path);  // format from extension
Corpus parse_corpus_jsonl(std::string_view contents);
Corpus parse_corpus_csv(std::string_view contents);

void save_corpus(const Corpus& corpus, const std::string& path);

Pool load_pool(const std::string& path);
void save_pool(const Pool& pool, const std::string& path);
std::string serialize_pool(const Pool& pool);

nlohmann::ordered_json to_json(const LabeledResponse& r, std::optional<Split> split = std::nullopt);

// n distinct elements of pool, deterministic for a given seed.
Pool sample_without_replacement(const Pool& pool, std::size_t n, std::uint64_t seed);

// Draws per_class elements of each label. Throws InsufficientPool naming the
// first class that is too small.
Pool stratified_sample(const Pool& pool, std::size_t per_class, std::uint64_t seed);

// Content hash of a pool's canonical serialization.
std::string pool_hash(const Pool& pool);

}  // namespace augmentor
