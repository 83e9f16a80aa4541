#include "augmentor/consistency.hpp"

#include <map>
#include <set>

#include "augmentor/error.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const ConsistencyRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["intended_label"] = r.intended_label;
  j["graded_score"] = r.graded_score ? json(*r.graded_score) : json(nullptr);
  j["parse_ok"] = r.parse_ok;
  j["raw_grading"] = r.raw_grading;
  return j;
}

ConsistencyRecord consistency_record_from_json(const json& j) {
  try {
    ConsistencyRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.intended_label = j.at("intended_label").get<int>();
    r.parse_ok = j.at("parse_ok").get<bool>();
    if (j.contains("graded_score") && !j["graded_score"].is_null()) {
      r.graded_score = j["graded_score"].get<int>();
    }
    r.raw_grading = j.value("raw_grading", std::string());
    if (r.parse_ok != r.graded_score.has_value()) {
      throw PreconditionError("MalformedRecord",
                              r.sample_id + ": graded_score must be present iff parse_ok");
    }
    return r;
  } catch (const json::exception& e) {
    throw PreconditionError("MalformedRecord", e.what());
  }
}

std::vector<ConsistencyRecord> load_records(const std::string& path) {
  std::vector<ConsistencyRecord> out;
  std::size_t row = 0;
  const std::string contents = read_file(path);
  for (auto line : split_lines(contents)) {
    ++row;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw PreconditionError("MalformedRecord", "row " + std::to_string(row) + ": invalid JSON");
    }
    out.push_back(consistency_record_from_json(j));
  }
  return out;
}

void save_records(const std::vector<ConsistencyRecord>& records, const std::string& path) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  write_file(path, out);
}

namespace {

// End offset (exclusive) of the balanced {...} starting at `open`, honoring
// JSON string quoting, or npos.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace

int parse_score(std::string_view raw) {
  for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    auto end = balanced_end(raw, open);
    if (end == std::string_view::npos) continue;
    json obj = json::parse(raw.substr(open, end - open), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    auto it = obj.find("Score");
    if (it == obj.end() || !it->is_number_integer()) continue;
    auto v = it->get<long long>();
    if (v == 0 || v == 1) return static_cast<int>(v);
  }
  std::string excerpt(raw.substr(0, 80));
  throw PreconditionError("ParseFailure", "no JSON object with Score in {0,1}: " + excerpt);
}

ChatRequest render_grading_prompt(const PromptTemplate& rubric_tpl,
                                  const std::string& response_text,
                                  const std::string& model_name, int max_tokens) {
  for (const char* name : {"rubric", "response"}) {
    if (rubric_tpl.user_text.find(std::string("{{") + name + "}}") == std::string::npos) {
      throw PreconditionError("TemplateError",
                              std::string("grading user_text lacks placeholder {{") + name + "}}");
    }
  }
  const std::vector<std::pair<std::string, std::string>> values = {
      {"rubric", rubric_tpl.rubric_text},
      {"response", response_text},
  };
  ChatRequest req;
  req.system_prompt = substitute(rubric_tpl.system_text, values);
  req.user_prompt = substitute(rubric_tpl.user_text, values);
  req.temperature = 0.0;
  req.max_tokens = max_tokens;
  req.model_name = model_name;
  return req;
}

std::vector<ConsistencyRecord> grade_pool(const Pool& pool, const PromptTemplate& rubric_tpl,
                                          Gateway& gateway, const std::string& model_name) {
  if (pool.empty()) throw PreconditionError("EmptyInput", "nothing to grade");
  std::vector<ChatRequest> reqs;
  reqs.reserve(pool.size());
  for (const auto& r : pool) reqs.push_back(render_grading_prompt(rubric_tpl, r.text, model_name));

  std::vector<ChatResponse> responses;
  try {
    responses = gateway.complete_all(reqs);
  } catch (const Error& e) {
    // complete_all reports "request <i>"; name the sample instead.
    std::string detail = e.detail();
    if (detail.rfind("request ", 0) == 0) {
      auto colon = detail.find(':');
      auto index = std::stoul(detail.substr(8, colon - 8));
      detail = "sample " + pool[index].id + detail.substr(colon);
    }
    throw Error(e.category(), e.kind(), detail);
  }

  std::vector<ConsistencyRecord> records;
  records.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    ConsistencyRecord rec;
    rec.sample_id = pool[i].id;
    rec.intended_label = pool[i].label;
    rec.raw_grading = responses[i].raw_text;
    try {
      rec.graded_score = parse_score(rec.raw_grading);
      rec.parse_ok = true;
    } catch (const PreconditionError&) {
      rec.parse_ok = false;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

AgreementReport agreement_metrics(const std::vector<ConsistencyRecord>& records) {
  Confusion c;
  for (const auto& r : records) {
    if (!r.parse_ok) continue;
    bool y = r.intended_label == 1;
    bool p = *r.graded_score == 1;
    if (y && p) ++c.tp;
    else if (y) ++c.fn;
    else if (p) ++c.fp;
    else ++c.tn;
  }
  if (c.n() == 0) throw PreconditionError("NoParsedRecords", "no record has a parsed score");
  return metrics_from_confusion(c);
}

std::string_view to_string(RemovalReason r) {
  return r == RemovalReason::kMismatch ? "mismatch" : "parse_failure";
}

FilterResult filter_inconsistent(const Pool& pool, const std::vector<ConsistencyRecord>& records) {
  std::map<std::string, const ConsistencyRecord*> by_id;
  for (const auto& r : records) by_id[r.sample_id] = &r;
  FilterResult out;
  for (const auto& sample : pool) {
    auto it = by_id.find(sample.id);
    if (it == by_id.end()) throw PreconditionError("MissingRecord", sample.id);
    const auto& rec = *it->second;
    if (rec.intended_label != sample.label) {
      throw PreconditionError("MalformedRecord",
                              sample.id + ": record label differs from the pool label");
    }
    if (!rec.parse_ok) {
      out.removed.push_back({sample.id, RemovalReason::kParseFailure});
    } else if (!rec.consistent()) {
      out.removed.push_back({sample.id, RemovalReason::kMismatch});
    } else {
      out.retained.push_back(sample);
    }
  }
  return out;
}

void save_manifest(const std::vector<Removal>& removed, const std::string& path) {
  std::string out;
  for (const auto& r : removed) {
    ordered_json j;
    j["id"] = r.id;
    j["reason"] = std::string(to_string(r.reason));
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

Pool sample_for_validation(const Pool& pool, std::size_t n, std::uint64_t seed, bool per_class) {
  if (!per_class && n % 2 != 0) {
    throw PreconditionError("InvalidConfig", "an equal split needs an even sample size");
  }
  return stratified_sample(pool, per_class ? n : n / 2, seed);
}

}  // namespace augmentor
