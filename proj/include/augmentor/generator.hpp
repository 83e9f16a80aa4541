#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "augmentor/corpus.hpp"
#include "augmentor/llm_gateway.hpp"

namespace augmentor {

struct FewShotExample {
  std::string text;
  int label = 0;

  bool operator==(const FewShotExample&) const = default;
};

// A prompt pair plus rubric. user_text uses {{rubric}} and {{examples}}
// placeholders (generation) or {{rubric}} and {{response}} (grading);
// {{batch_size}} is optional.
struct PromptTemplate {
  std::string system_text;
  std::string user_text;
  std::vector<FewShotExample> few_shot_examples;
  std::string rubric_text;
  int target_label = 1;

  bool operator==(const PromptTemplate&) const = default;
};

PromptTemplate load_template(const std::string& path);
PromptTemplate template_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const PromptTemplate& tpl);

// Templates shipped with the tool; also written to data/templates/.
PromptTemplate default_positive_template();
PromptTemplate default_negative_template();
PromptTemplate default_grading_template();

struct GenerationConfig {
  double temperature = 0.3;
  std::size_t batch_size = 10;
  std::size_t n_total_per_label = 0;
  std::uint64_t seed = 0;
  bool strict = false;  // re-request short classes for up to two extra rounds
  int max_tokens = kDefaultMaxTokens;
  std::string model_name = kDefaultModel;
};

void validate(const GenerationConfig& cfg);

// Replaces {{name}} placeholders. Throws TemplateError when one is left
// unresolved.
std::string substitute(std::string_view text,
                       const std::vector<std::pair<std::string, std::string>>& values);

ChatRequest render_prompt(const PromptTemplate& tpl, const GenerationConfig& cfg);

// Splits on newlines, trims, strips leading enumeration markers ("1.", "2)",
// "-", "*", "•") and drops empty lines.
std::vector<std::string> parse_generation(std::string_view raw_text);

struct GenerationReport {
  Pool pool;
  std::size_t requests = 0;
  std::size_t shortfall_pos = 0;
  std::size_t shortfall_neg = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t leaked_dropped = 0;
  std::vector<std::string> warnings;  // ShortBatch and leakage notes
};

// Generates up to n_total_per_label samples per class. Any text already in
// `exclude_texts` (human train/validation) is dropped to keep evaluation
// clean. Pool order: positive batches first, then negative, each by batch
// and line index.
GenerationReport generate_pool(const PromptTemplate& tpl_pos, const PromptTemplate& tpl_neg,
                               const GenerationConfig& cfg, Gateway& gateway,
                               const std::vector<std::string>& exclude_texts = {});

// Requests generate_pool issues for its first round, in order.
std::vector<ChatRequest> generation_requests(const PromptTemplate& tpl_pos,
                                             const PromptTemplate& tpl_neg,
                                             const GenerationConfig& cfg);

}  // namespace augmentor
