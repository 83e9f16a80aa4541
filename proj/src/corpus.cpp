#include "augmentor/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "augmentor/error.hpp"
#include "augmentor/random.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Source s) { return s == Source::kHuman ? "human" : "synthetic"; }
std::string_view to_string(Phase p) { return p == Phase::kPredict ? "predict" : "explain"; }
std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "validation"; }

namespace {

[[noreturn]] void malformed(std::size_t row, const std::string& reason) {
  throw PreconditionError("MalformedRecord", "row " + std::to_string(row) + ": " + reason);
}

// A record before it is placed into a Corpus set.
struct RawRecord {
  std::optional<std::string> id;
  std::string text;
  std::optional<std::string> label;  // textual; converted with validation
  std::optional<long long> label_int;
  std::string source;
  std::optional<std::string> split;
  std::optional<std::string> phase;
  std::optional<double> temperature;
  std::optional<bool> consistent;
};

int parse_label(const RawRecord& raw, std::size_t row) {
  if (raw.label_int) {
    if (*raw.label_int != 0 && *raw.label_int != 1) {
      malformed(row, "label must be 0 or 1, got " + std::to_string(*raw.label_int));
    }
    return static_cast<int>(*raw.label_int);
  }
  if (!raw.label) malformed(row, "missing label");
  auto t = trim(*raw.label);
  if (t == "0") return 0;
  if (t == "1") return 1;
  malformed(row, "label must be 0 or 1, got '" + std::string(t) + "'");
}

Source parse_source(const std::string& s, std::size_t row) {
  if (s == "human") return Source::kHuman;
  if (s == "synthetic") return Source::kSynthetic;
  malformed(row, "source must be 'human' or 'synthetic', got '" + s + "'");
}

Phase parse_phase(const std::string& s, std::size_t row) {
  if (s == "predict") return Phase::kPredict;
  if (s == "explain") return Phase::kExplain;
  malformed(row, "phase must be 'predict' or 'explain', got '" + s + "'");
}

Split parse_split(const std::string& s, std::size_t row) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  malformed(row, "split must be 'train' or 'validation', got '" + s + "'");
}

// Turns raw records into validated responses, assigning ids and rejecting
// duplicates.
class RecordReader {
 public:
  std::pair<LabeledResponse, Split> read(const RawRecord& raw, std::size_t row) {
    LabeledResponse r;
    r.source = parse_source(raw.source, row);
    r.text = raw.text;
    r.label = parse_label(raw, row);
    if (raw.phase) r.phase = parse_phase(*raw.phase, row);
    r.temperature = raw.temperature;
    r.consistent = raw.consistent;

    auto& counter = r.source == Source::kHuman ? human_counter_ : synthetic_counter_;
    ++counter;
    r.id = raw.id && !raw.id->empty()
               ? *raw.id
               : std::string(to_string(r.source)) + "-" + std::to_string(counter);

    try {
      validate(r);
    } catch (const Error& e) {
      malformed(row, e.what());
    }
    if (!ids_.insert(r.id).second) {
      throw PreconditionError("DuplicateId", r.id + " (row " + std::to_string(row) + ")");
    }
    Split split = raw.split ? parse_split(*raw.split, row) : Split::kTrain;
    if (r.source == Source::kSynthetic && split == Split::kValidation) {
      malformed(row, "validation records must be human");
    }
    return {std::move(r), split};
  }

 private:
  std::set<std::string> ids_;
  std::size_t human_counter_ = 0;
  std::size_t synthetic_counter_ = 0;
};

class CorpusBuilder {
 public:
  void add(const RawRecord& raw, std::size_t row) {
    auto [r, split] = reader_.read(raw, row);
    if (r.source == Source::kSynthetic) {
      double t = *r.temperature;
      corpus_.synthetic_pools[t].push_back(std::move(r));
    } else if (split == Split::kValidation) {
      corpus_.validation.push_back(std::move(r));
    } else {
      corpus_.human_train.push_back(std::move(r));
    }
  }

  Corpus finish() && {
    validate(corpus_);
    return std::move(corpus_);
  }

 private:
  RecordReader reader_;
  Corpus corpus_;
};

RawRecord raw_from_json(const json& obj, std::size_t row) {
  if (!obj.is_object()) malformed(row, "expected a JSON object");
  RawRecord raw;
  auto get_string = [&](const char* key, bool required) -> std::optional<std::string> {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
      if (required) malformed(row, std::string("missing field '") + key + "'");
      return std::nullopt;
    }
    if (!it->is_string()) malformed(row, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };
  raw.id = get_string("id", false);
  raw.text = *get_string("text", true);
  raw.source = *get_string("source", true);
  raw.split = get_string("split", false);
  raw.phase = get_string("phase", false);

  auto label = obj.find("label");
  if (label == obj.end() || label->is_null()) malformed(row, "missing field 'label'");
  if (label->is_number_integer()) {
    raw.label_int = label->get<long long>();
  } else if (label->is_number_float()) {
    double v = label->get<double>();
    if (v != std::floor(v)) malformed(row, "label must be an integer");
    raw.label_int = static_cast<long long>(v);
  } else {
    malformed(row, "label must be an integer");
  }

  if (auto t = obj.find("temperature"); t != obj.end() && !t->is_null()) {
    if (!t->is_number()) malformed(row, "temperature must be a number");
    raw.temperature = t->get<double>();
  }
  if (auto c = obj.find("consistent"); c != obj.end() && !c->is_null()) {
    if (!c->is_boolean()) malformed(row, "consistent must be a boolean");
    raw.consistent = c->get<bool>();
  }
  return raw;
}

// RFC 4180 style CSV: quoted fields may hold commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view s,
                                                     std::vector<std::size_t>& line_numbers) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.size() == 1 && row[0].empty();
    if (!blank) {
      rows.push_back(std::move(row));
      line_numbers.push_back(row_line);
    }
    row.clear();
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
      end_row();
      ++line;
      row_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) {
    throw PreconditionError("MalformedRecord",
                            "row " + std::to_string(row_line) + ": unterminated quoted field");
  }
  if (field_started || !row.empty()) end_row();
  return rows;
}

}  // namespace

void validate(const LabeledResponse& r) {
  auto fail = [&](const std::string& why) { throw PreconditionError("MalformedRecord", why); };
  if (r.label != 0 && r.label != 1) fail("label must be 0 or 1, got " + std::to_string(r.label));
  if (trim(r.text).empty()) fail("text is empty");
  if (r.id.empty()) fail("id is empty");
  if (r.source == Source::kSynthetic) {
    if (!r.temperature) fail("synthetic record without temperature");
    if (!std::isfinite(*r.temperature) || *r.temperature < 0.0 || *r.temperature > 2.0) {
      fail("temperature must be within [0, 2]");
    }
  } else {
    if (r.temperature) fail("human record with a temperature");
    if (r.consistent) fail("human record with a consistency result");
  }
}

void validate(const Corpus& corpus) {
  std::set<std::string> ids;
  auto check_ids = [&](const Pool& pool) {
    for (const auto& r : pool) {
      validate(r);
      if (!ids.insert(r.id).second) throw PreconditionError("DuplicateId", r.id);
    }
  };
  check_ids(corpus.human_train);
  check_ids(corpus.validation);
  for (const auto& r : corpus.human_train) {
    if (r.source != Source::kHuman) {
      throw PreconditionError("MalformedRecord", "human_train entry " + r.id + " is not human");
    }
  }
  for (const auto& r : corpus.validation) {
    if (r.source != Source::kHuman) {
      throw PreconditionError("MalformedRecord", "validation entry " + r.id + " is not human");
    }
  }
  for (const auto& [t, pool] : corpus.synthetic_pools) {
    check_ids(pool);
    for (const auto& r : pool) {
      if (r.source != Source::kSynthetic || r.temperature != t) {
        throw PreconditionError("MalformedRecord",
                                "pool entry " + r.id + " does not match pool temperature " +
                                    format_double(t));
      }
    }
  }
}

Corpus parse_corpus_jsonl(std::string_view contents) {
  CorpusBuilder builder;
  std::size_t row = 0;
  for (auto line : split_lines(contents)) {
    ++row;
    if (trim(line).empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) malformed(row, "invalid JSON");
    builder.add(raw_from_json(obj, row), row);
  }
  return std::move(builder).finish();
}

Corpus parse_corpus_csv(std::string_view contents) {
  std::vector<std::size_t> lines;
  auto rows = parse_csv_rows(contents, lines);
  CorpusBuilder builder;
  if (rows.empty()) return std::move(builder).finish();

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[std::string(trim(rows[0][i]))] = i;
  for (const char* required : {"text", "label", "source"}) {
    if (!col.count(required)) malformed(1, std::string("header lacks column '") + required + "'");
  }
  auto cell = [&](const std::vector<std::string>& r, const char* name) -> std::optional<std::string> {
    auto it = col.find(name);
    if (it == col.end() || it->second >= r.size()) return std::nullopt;
    if (r[it->second].empty()) return std::nullopt;
    return r[it->second];
  };

  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::size_t row = lines[i];
    if (r.size() != rows[0].size()) {
      malformed(row, "expected " + std::to_string(rows[0].size()) + " columns, got " +
                         std::to_string(r.size()));
    }
    RawRecord raw;
    raw.id = cell(r, "id");
    raw.text = cell(r, "text").value_or("");
    raw.label = cell(r, "label");
    raw.source = std::string(trim(cell(r, "source").value_or("")));
    raw.split = cell(r, "split");
    raw.phase = cell(r, "phase");
    if (auto t = cell(r, "temperature")) {
      try {
        std::size_t used = 0;
        raw.temperature = std::stod(*t, &used);
        if (used != t->size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        malformed(row, "temperature is not a number: '" + *t + "'");
      }
    }
    builder.add(raw, row);
  }
  return std::move(builder).finish();
}

Corpus load_corpus(const std::string& path, CorpusFormat format) {
  std::string contents = read_file(path);
  return format == CorpusFormat::kCsv ? parse_corpus_csv(contents) : parse_corpus_jsonl(contents);
}

Corpus load_corpus(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  return load_corpus(path, ext == ".csv" ? CorpusFormat::kCsv : CorpusFormat::kJsonl);
}

ordered_json to_json(const LabeledResponse& r, std::optional<Split> split) {
  ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["label"] = r.label;
  j["source"] = std::string(to_string(r.source));
  if (split) j["split"] = std::string(to_string(*split));
  if (r.phase) j["phase"] = std::string(to_string(*r.phase));
  if (r.temperature) j["temperature"] = *r.temperature;
  if (r.consistent) j["consistent"] = *r.consistent;
  return j;
}

namespace {

void append_line(std::string& out, const ordered_json& j) {
  out += j.dump(-1, ' ', false, json::error_handler_t::replace);
  out += '\n';
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  validate(corpus);
  std::string out;
  for (const auto& r : corpus.human_train) append_line(out, to_json(r, Split::kTrain));
  for (const auto& r : corpus.validation) append_line(out, to_json(r, Split::kValidation));
  for (const auto& [t, pool] : corpus.synthetic_pools) {
    for (const auto& r : pool) append_line(out, to_json(r));
  }
  write_file(path, out);
}

std::string serialize_pool(const Pool& pool) {
  std::string out;
  for (const auto& r : pool) append_line(out, to_json(r));
  return out;
}

void save_pool(const Pool& pool, const std::string& path) {
  std::set<std::string> ids;
  for (const auto& r : pool) {
    validate(r);
    if (!ids.insert(r.id).second) throw PreconditionError("DuplicateId", r.id);
  }
  write_file(path, serialize_pool(pool));
}

Pool load_pool(const std::string& path) {
  std::string contents = read_file(path);
  RecordReader reader;
  Pool out;
  std::size_t row = 0;
  for (auto line : split_lines(contents)) {
    ++row;
    if (trim(line).empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) malformed(row, "invalid JSON");
    out.push_back(reader.read(raw_from_json(obj, row), row).first);
  }
  return out;
}

Pool sample_without_replacement(const Pool& pool, std::size_t n, std::uint64_t seed) {
  if (n > pool.size()) {
    throw PreconditionError("InsufficientPool", "requested " + std::to_string(n) +
                                                    ", available " + std::to_string(pool.size()));
  }
  Pool out;
  out.reserve(n);
  for (auto i : sample_indices(pool.size(), n, seed)) out.push_back(pool[i]);
  return out;
}

Pool stratified_sample(const Pool& pool, std::size_t per_class, std::uint64_t seed) {
  Pool out;
  for (int label : {1, 0}) {
    Pool members;
    for (const auto& r : pool) {
      if (r.label == label) members.push_back(r);
    }
    if (members.size() < per_class) {
      throw PreconditionError("InsufficientPool",
                              "class " + std::to_string(label) + ": requested " +
                                  std::to_string(per_class) + ", available " +
                                  std::to_string(members.size()));
    }
    auto drawn = sample_without_replacement(members, per_class, derive_seed(seed, label));
    out.insert(out.end(), drawn.begin(), drawn.end());
  }
  return out;
}

std::string pool_hash(const Pool& pool) { return sha256_hex(serialize_pool(pool)); }

}  // namespace augmentor
