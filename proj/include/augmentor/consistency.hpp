#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "augmentor/corpus.hpp"
#include "augmentor/evaluation.hpp"
#include "augmentor/generator.hpp"
#include "augmentor/llm_gateway.hpp"

namespace augmentor {

// Self-grading outcome for one synthetic sample.
struct ConsistencyRecord {
  std::string sample_id;
  int intended_label = 0;
  std::optional<int> graded_score;  // empty iff parse_ok is false
  bool parse_ok = false;
  std::string raw_grading;

  bool consistent() const { return parse_ok && graded_score == intended_label; }
  bool operator==(const ConsistencyRecord&) const = default;
};

nlohmann::ordered_json to_json(const ConsistencyRecord& r);
ConsistencyRecord consistency_record_from_json(const nlohmann::json& j);
std::vector<ConsistencyRecord> load_records(const std::string& path);
void save_records(const std::vector<ConsistencyRecord>& records, const std::string& path);

// Reads the integer "Score" from the first JSON object in `raw` that has one,
// skipping surrounding prose and code fences. Throws ParseFailure.
int parse_score(std::string_view raw);

// Grading requests run at temperature 0.
ChatRequest render_grading_prompt(const PromptTemplate& rubric_tpl, const std::string& response_text,
                                  const std::string& model_name = kDefaultModel,
                                  int max_tokens = 256);

std::vector<ConsistencyRecord> grade_pool(const Pool& pool, const PromptTemplate& rubric_tpl,
                                          Gateway& gateway,
                                          const std::string& model_name = kDefaultModel);

// Treats graded_score as a prediction of intended_label. Records that failed
// to parse are excluded; throws PreconditionError("NoParsedRecords") if none
// remain.
AgreementReport agreement_metrics(const std::vector<ConsistencyRecord>& records);

enum class RemovalReason { kMismatch, kParseFailure };
std::string_view to_string(RemovalReason r);

struct Removal {
  std::string id;
  RemovalReason reason;
};

struct FilterResult {
  Pool retained;
  std::vector<Removal> removed;

  double retention() const {
    auto total = retained.size() + removed.size();
    return total == 0 ? 1.0 : static_cast<double>(retained.size()) / static_cast<double>(total);
  }
};

// Keeps samples whose self-grade matches their label. Throws MissingRecord.
FilterResult filter_inconsistent(const Pool& pool, const std::vector<ConsistencyRecord>& records);

void save_manifest(const std::vector<Removal>& removed, const std::string& path);

// Stratified draw of n samples, half from each class (or n per class when
// per_class is set). Throws InsufficientPool.
Pool sample_for_validation(const Pool& pool, std::size_t n, std::uint64_t seed,
                           bool per_class = false);

}  // namespace augmentor
