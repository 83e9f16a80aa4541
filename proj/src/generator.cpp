#include "augmentor/generator.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "augmentor/error.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

using nlohmann::json;
using nlohmann::ordered_json;

PromptTemplate template_from_json(const json& j) {
  try {
    PromptTemplate tpl;
    tpl.system_text = j.at("system_text").get<std::string>();
    tpl.user_text = j.at("user_text").get<std::string>();
    tpl.rubric_text = j.value("rubric_text", std::string());
    tpl.target_label = j.value("target_label", 1);
    if (j.contains("few_shot_examples")) {
      for (const auto& ex : j.at("few_shot_examples")) {
        tpl.few_shot_examples.push_back({ex.at("text").get<std::string>(), ex.at("label").get<int>()});
      }
    }
    if (tpl.target_label != 0 && tpl.target_label != 1) {
      throw PreconditionError("TemplateError", "target_label must be 0 or 1");
    }
    for (const auto& ex : tpl.few_shot_examples) {
      if (ex.label != tpl.target_label) {
        throw PreconditionError("TemplateError",
                                "few-shot example labelled " + std::to_string(ex.label) +
                                    " in a template targeting " + std::to_string(tpl.target_label));
      }
    }
    return tpl;
  } catch (const json::exception& e) {
    throw PreconditionError("TemplateError", e.what());
  }
}

PromptTemplate load_template(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw PreconditionError("TemplateError", path + " is not valid JSON");
  return template_from_json(j);
}

ordered_json to_json(const PromptTemplate& tpl) {
  ordered_json j;
  j["system_text"] = tpl.system_text;
  j["user_text"] = tpl.user_text;
  j["rubric_text"] = tpl.rubric_text;
  j["few_shot_examples"] = ordered_json::array();
  for (const auto& ex : tpl.few_shot_examples) {
    j["few_shot_examples"].push_back(ordered_json{{"text", ex.text}, {"label", ex.label}});
  }
  j["target_label"] = tpl.target_label;
  return j;
}

namespace {

constexpr const char* kRubric =
    "A response is adequate (score 1) when the tutor shows genuine interest in the student's "
    "cultural background or identity, for example by asking about traditions, languages, "
    "family, or places the student comes from, or by relating the lesson to the student's "
    "heritage, so that the student feels recognized and included. A response is inadequate "
    "(score 0) when it gives neutral or generic feedback about the task only, such as "
    "homework, notebooks, punctuality, or the math problem, without engaging with who the "
    "student is.";

constexpr const char* kGenerationSystem =
    "You write short example messages that a tutor might say to a middle-school student. "
    "You follow the grading rubric exactly and output plain text only.";

}  // namespace

PromptTemplate default_positive_template() {
  PromptTemplate tpl;
  tpl.system_text = kGenerationSystem;
  tpl.user_text =
      "Rubric:\n{{rubric}}\n\n"
      "DESIRED RESPONSES. Write tutor messages that earn a score of 1: each one should "
      "invite the student to share something about their culture, family, language, or home, "
      "and connect it to how the tutor can support them.\n\n"
      "Examples of desired responses:\n{{examples}}";
  tpl.rubric_text = kRubric;
  tpl.target_label = 1;
  tpl.few_shot_examples = {
      {"Hi Sam, I'd love to hear about the holidays your family celebrates back home. "
       "Which one is your favorite?",
       1},
      {"Before we start, could you tell me a little about the language you speak with your "
       "grandparents? Maybe we can use some of those words in our word problems.",
       1},
      {"I heard you moved here recently. What do you miss most about where you grew up?", 1},
  };
  return tpl;
}

PromptTemplate default_negative_template() {
  PromptTemplate tpl;
  tpl.system_text = kGenerationSystem;
  tpl.user_text =
      "Rubric:\n{{rubric}}\n\n"
      "UNDESIRED RESPONSES. Write tutor messages that earn a score of 0: each one should be "
      "polite but focus only on the task, such as homework, notebooks, being on time, or the "
      "current math problem, with no reference to the student's background.\n\n"
      "Examples of undesired responses:\n{{examples}}";
  tpl.rubric_text = kRubric;
  tpl.target_label = 0;
  tpl.few_shot_examples = {
      {"Please remember to bring your notebook next time so we can finish the worksheet.", 0},
      {"Let's focus on the fractions problem. What is the first step?", 0},
      {"You were late again today, so we need to work quickly on the homework.", 0},
  };
  return tpl;
}

PromptTemplate default_grading_template() {
  PromptTemplate tpl;
  tpl.system_text =
      "You grade tutor messages against a rubric. Reply with a JSON object of the form "
      "{\"Score\": 0 or 1, \"Reason\": \"...\"} and nothing else.";
  tpl.user_text = "Rubric:\n{{rubric}}\n\nTutor message:\n{{response}}";
  tpl.rubric_text = kRubric;
  tpl.target_label = 1;
  return tpl;
}

void validate(const GenerationConfig& cfg) {
  if (cfg.batch_size < 1) throw PreconditionError("InvalidConfig", "batch_size must be >= 1");
  if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0)) {
    throw PreconditionError("InvalidConfig", "temperature must be within [0, 2]");
  }
}

std::string substitute(std::string_view text,
                       const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw PreconditionError("TemplateError", "unterminated placeholder at offset " +
                                                   std::to_string(open));
    }
    std::string name(trim(text.substr(open + 2, close - open - 2)));
    auto it = std::find_if(values.begin(), values.end(),
                           [&](const auto& kv) { return kv.first == name; });
    if (it == values.end()) {
      throw PreconditionError("TemplateError", "unresolved placeholder {{" + name + "}}");
    }
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

namespace {

void require_placeholder(const PromptTemplate& tpl, const std::string& name) {
  if (tpl.user_text.find("{{" + name + "}}") == std::string::npos) {
    throw PreconditionError("TemplateError", "user_text lacks placeholder {{" + name + "}}");
  }
}

std::string format_examples(const std::vector<FewShotExample>& examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i) out += '\n';
    out += "Example " + std::to_string(i + 1) + ": " + examples[i].text;
  }
  return out;
}

}  // namespace

ChatRequest render_prompt(const PromptTemplate& tpl, const GenerationConfig& cfg) {
  validate(cfg);
  require_placeholder(tpl, "rubric");
  require_placeholder(tpl, "examples");
  for (const auto& ex : tpl.few_shot_examples) {
    if (ex.label != tpl.target_label) {
      throw PreconditionError("TemplateError", "few-shot example label does not match target");
    }
  }
  const std::vector<std::pair<std::string, std::string>> values = {
      {"rubric", tpl.rubric_text},
      {"examples", format_examples(tpl.few_shot_examples)},
      {"batch_size", std::to_string(cfg.batch_size)},
  };
  ChatRequest req;
  req.system_prompt = substitute(tpl.system_text, values);
  req.user_prompt = substitute(tpl.user_text, values);
  req.user_prompt += "\n\nWrite exactly " + std::to_string(cfg.batch_size) +
                     " new responses, one per line, separated by newlines. Do not number "
                     "them and do not add any other text.";
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  req.model_name = cfg.model_name;
  return req;
}

namespace {

// Returns the number of bytes of a leading list marker plus following
// whitespace, or 0 if the line does not start with one.
std::size_t marker_length(std::string_view s) {
  std::size_t n = 0;
  if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) {
    while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
    if (n < s.size() && (s[n] == '.' || s[n] == ')')) {
      ++n;
    } else {
      return 0;
    }
  } else if (!s.empty() && (s[0] == '-' || s[0] == '*')) {
    n = 1;
  } else if (s.substr(0, 3) == "\xE2\x80\xA2") {  // U+2022 bullet
    n = 3;
  } else {
    return 0;
  }
  if (n == s.size() || s[n] == ' ' || s[n] == '\t') return n;
  return 0;
}

}  // namespace

std::vector<std::string> parse_generation(std::string_view raw_text) {
  std::vector<std::string> out;
  for (auto line : split_lines(raw_text)) {
    auto t = trim(line);
    for (std::size_t m = marker_length(t); m > 0; m = marker_length(t)) t = trim(t.substr(m));
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<ChatRequest> generation_requests(const PromptTemplate& tpl_pos,
                                             const PromptTemplate& tpl_neg,
                                             const GenerationConfig& cfg) {
  validate(cfg);
  std::size_t batches = (cfg.n_total_per_label + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<ChatRequest> reqs;
  for (const auto* tpl : {&tpl_pos, &tpl_neg}) {
    ChatRequest req = render_prompt(*tpl, cfg);
    for (std::size_t b = 0; b < batches; ++b) reqs.push_back(req);
  }
  return reqs;
}

GenerationReport generate_pool(const PromptTemplate& tpl_pos, const PromptTemplate& tpl_neg,
                               const GenerationConfig& cfg, Gateway& gateway,
                               const std::vector<std::string>& exclude_texts) {
  validate(cfg);
  if (tpl_pos.target_label != 1 || tpl_neg.target_label != 0) {
    throw PreconditionError("TemplateError",
                            "positive template must target 1 and negative template 0");
  }
  GenerationReport report;
  const std::set<std::string> excluded = [&] {
    std::set<std::string> s;
    for (const auto& t : exclude_texts) s.emplace(trim(t));
    return s;
  }();

  struct ClassState {
    const PromptTemplate* tpl;
    int label;
    Pool samples;
    std::size_t batches_issued = 0;
  };
  std::vector<ClassState> classes = {{&tpl_pos, 1, {}, 0}, {&tpl_neg, 0, {}, 0}};
  std::set<std::string> seen;
  const std::string temp_tag = format_double(cfg.temperature);

  const int max_rounds = cfg.strict ? 3 : 1;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<ChatRequest> reqs;
    std::vector<std::size_t> owner;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::size_t missing = cfg.n_total_per_label - classes[c].samples.size();
      std::size_t batches = (missing + cfg.batch_size - 1) / cfg.batch_size;
      ChatRequest req = render_prompt(*classes[c].tpl, cfg);
      for (std::size_t b = 0; b < batches; ++b) {
        reqs.push_back(req);
        owner.push_back(c);
      }
    }
    if (reqs.empty()) break;

    auto responses = gateway.complete_all(reqs);
    report.requests += reqs.size();
    for (std::size_t i = 0; i < responses.size(); ++i) {
      auto& cls = classes[owner[i]];
      std::size_t batch_index = cls.batches_issued++;
      auto lines = parse_generation(responses[i].raw_text);
      if (lines.size() < cfg.batch_size) {
        report.warnings.push_back("ShortBatch: label " + std::to_string(cls.label) + " batch " +
                                  std::to_string(batch_index) + " parsed " +
                                  std::to_string(lines.size()) + " of " +
                                  std::to_string(cfg.batch_size) + " lines");
      }
      for (auto& line : lines) {
        if (cls.samples.size() >= cfg.n_total_per_label) break;
        if (excluded.count(line)) {
          ++report.leaked_dropped;
          report.warnings.push_back("Leakage: dropped generated text matching a human sample: " +
                                    line.substr(0, 60));
          continue;
        }
        if (!seen.insert(line).second) {
          ++report.duplicates_dropped;
          continue;
        }
        LabeledResponse r;
        r.text = std::move(line);
        r.label = cls.label;
        r.source = Source::kSynthetic;
        r.temperature = cfg.temperature;
        r.id = "synthetic-t" + temp_tag + "-l" + std::to_string(cls.label) + "-" +
               std::to_string(cls.samples.size() + 1);
        cls.samples.push_back(std::move(r));
      }
    }
  }

  for (auto& cls : classes) {
    std::size_t shortfall = cfg.n_total_per_label - cls.samples.size();
    (cls.label == 1 ? report.shortfall_pos : report.shortfall_neg) = shortfall;
    std::move(cls.samples.begin(), cls.samples.end(), std::back_inserter(report.pool));
  }
  return report;
}

}  // namespace augmentor
