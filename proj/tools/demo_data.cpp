#include "demo_data.hpp"

#include <filesystem>
#include <set>
#include <vector>

#include <json.hpp>

#include "augmentor/consistency.hpp"
#include "augmentor/generator.hpp"
#include "augmentor/llm_gateway.hpp"
#include "augmentor/random.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor::demo {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kBackground = {
    "culture",  "family",       "language", "grandparents", "holidays", "hometown",
    "traditions", "heritage",   "customs",  "neighborhood", "music",    "recipes",
    "festivals", "stories",     "homeland", "relatives"};
const std::vector<std::string> kTask = {
    "homework", "notebook", "worksheet", "fractions", "deadline",   "quiz",
    "equation", "textbook", "timer",     "chapter",   "exercise",   "decimals",
    "assignment", "calculator", "schedule", "answers"};

const std::vector<std::string> kNames = {"Sam",  "Ana",   "Luis",  "Mei",   "Omar",  "Priya",
                                         "Jon",  "Fatima", "Kwame", "Sofia", "Ivan", "Aiko"};
const std::vector<std::string> kOpeners = {"Hi {n},", "Hello {n},", "Good morning {n},",
                                           "Okay {n},", "{n},", "Thanks {n},"};
const std::vector<std::string> kBodies = {
    "could we talk about your {a} and your {b} for a minute?",
    "tell me about the {a} you like, and then the {b}.",
    "I want to hear about {a} before we look at {b}.",
    "let's start with {a} and then move on to {b}.",
    "what do you think about {a}? We can connect it to {b}.",
    "remember the {a} we discussed and bring the {b} next time."};
const std::vector<std::string> kClosers = {"", " Take your time.", " Sounds good?",
                                           " I'm listening.", " We have plenty of time today.",
                                           " Let me know."};

// Streams derived from the layout seed.
enum Stream : std::uint64_t {
  kHumanStream = 1,
  kValidationStream = 2,
  kGenerationStream = 100,
};

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.uniform_index(v.size())];
}

// Writes texts whose keyword family is `family` (1 background, 0 task),
// using the first `vocab` words of it. Never repeats a text in `used`.
class TextMaker {
 public:
  explicit TextMaker(std::set<std::string>& used) : used_(used) {}

  std::string make(Rng& rng, int family, std::size_t vocab) {
    const auto& words = family == 1 ? kBackground : kTask;
    for (;;) {
      std::size_t a = rng.uniform_index(vocab);
      std::size_t b = rng.uniform_index(vocab - 1);
      if (b >= a) ++b;
      std::string text = replace_all(pick(rng, kOpeners), "{n}", pick(rng, kNames)) + " " +
                         replace_all(replace_all(pick(rng, kBodies), "{a}", words[a]), "{b}",
                                     words[b]) +
                         pick(rng, kClosers);
      if (used_.insert(text).second) return text;
    }
  }

 private:
  std::set<std::string>& used_;
};

std::vector<bool> noise_mask(std::size_t n, std::size_t noisy, std::uint64_t seed) {
  std::vector<bool> mask(n, false);
  for (auto i : sample_indices(n, noisy, seed)) mask[i] = true;
  return mask;
}

Pool human_set(const std::string& prefix, std::size_t n, std::size_t vocab, double noise,
               std::uint64_t seed, TextMaker& maker) {
  Rng rng(seed);
  auto noisy = noise_mask(n, static_cast<std::size_t>(noise * static_cast<double>(n) + 0.5),
                          derive_seed(seed, 1));
  Pool pool;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledResponse r;
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%03zu", prefix.c_str(), i + 1);
    r.id = id;
    r.label = i % 2 == 0 ? 1 : 0;
    r.text = maker.make(rng, noisy[i] ? 1 - r.label : r.label, vocab);
    r.source = Source::kHuman;
    r.phase = (i / 2) % 2 == 0 ? Phase::kPredict : Phase::kExplain;
    pool.push_back(std::move(r));
  }
  return pool;
}

std::string format_batch(const std::vector<std::string>& lines, std::size_t style) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (style % 3 == 1) out += std::to_string(i + 1) + ". ";
    if (style % 3 == 2) out += "- ";
    out += lines[i];
    out += "\n";
  }
  return out;
}

std::string grading_reply(int score, std::size_t style) {
  const std::string s = std::to_string(score);
  const std::string reason = score == 1 ? "The message invites the student to share their background."
                                        : "The message stays on the task and does not ask about the "
                                          "student's background.";
  switch (style % 4) {
    case 0:
      return "{\"Score\": " + s + ", \"Reason\": \"" + reason + "\"}";
    case 1:
      return "```json\n{\"Score\": " + s + "}\n```";
    case 2:
      return "Here is my assessment.\n{\"Reason\": \"" + reason + "\", \"Score\": " + s + "}";
    default:
      return "{\n  \"Score\": " + s + ",\n  \"Reason\": \"" + reason + "\"\n}";
  }
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_file(path.string(), j.dump(2) + "\n");
}

double noise_rate(double temperature) {
  if (temperature <= 0.3) return 0.02;
  if (temperature <= 0.7) return 0.06;
  return 0.10;
}

}  // namespace

Corpus demo_corpus(const DemoLayout& layout) {
  std::set<std::string> used;
  TextMaker maker(used);
  Corpus c;
  c.human_train = human_set("train", layout.human_train, layout.seen_keywords, layout.human_noise,
                            derive_seed(layout.seed, kHumanStream), maker);
  c.validation = human_set("valid", layout.validation, kBackground.size(),
                           layout.validation_noise, derive_seed(layout.seed, kValidationStream),
                           maker);
  return c;
}

std::size_t write_demo_data(const std::string& root_dir, const DemoLayout& layout) {
  const fs::path root(root_dir);
  const fs::path demo = root / "demo";
  const fs::path fixtures = demo / "fixtures";
  const fs::path pools = demo / "pools";
  fs::create_directories(root / "templates");
  fs::create_directories(fixtures);
  fs::create_directories(pools);
  std::size_t written = 0;

  const auto pos_tpl = default_positive_template();
  const auto neg_tpl = default_negative_template();
  const auto grading_tpl = default_grading_template();
  write_json(root / "templates" / "positive.json", to_json(pos_tpl));
  write_json(root / "templates" / "negative.json", to_json(neg_tpl));
  write_json(root / "templates" / "grading.json", to_json(grading_tpl));
  written += 3;

  // Rebuild the corpus with the same text registry so synthetic texts never
  // repeat a human one.
  std::set<std::string> used;
  TextMaker maker(used);
  Corpus corpus;
  corpus.human_train = human_set("train", layout.human_train, layout.seen_keywords,
                                 layout.human_noise, derive_seed(layout.seed, kHumanStream), maker);
  corpus.validation = human_set("valid", layout.validation, kBackground.size(),
                                layout.validation_noise,
                                derive_seed(layout.seed, kValidationStream), maker);
  save_corpus(corpus, (demo / "corpus.jsonl").string());
  ++written;

  FixtureStore store(fixtures.string());
  std::map<std::string, int> family_of;  // synthetic text -> keyword family
  const std::vector<double> temps = {0.3, 0.5, 0.7, 1.0};
  for (std::size_t ti = 0; ti < temps.size(); ++ti) {
    const double t = temps[ti];
    const bool main = t == kMainTemperature;
    GenerationConfig cfg;
    cfg.temperature = t;
    cfg.batch_size = layout.batch_size;
    cfg.n_total_per_label = main ? layout.main_per_label : layout.other_per_label;
    const std::uint64_t stream = derive_seed(layout.seed, kGenerationStream + ti);
    Rng rng(stream);

    for (int label : {1, 0}) {
      const auto& tpl = label == 1 ? pos_tpl : neg_tpl;
      ChatRequest req = render_prompt(tpl, cfg);
      const std::string fp = fingerprint(req);
      const std::size_t n = cfg.n_total_per_label;
      std::vector<bool> noisy(n, false);
      if (main) {
        if (label == 1) noisy = noise_mask(n, layout.main_mismatches, derive_seed(stream, 7));
      } else {
        for (std::size_t i = 0; i < n; ++i) noisy[i] = rng.uniform01() < noise_rate(t);
      }
      for (std::size_t b = 0; b * cfg.batch_size < n; ++b) {
        std::vector<std::string> lines;
        for (std::size_t i = b * cfg.batch_size; i < std::min(n, (b + 1) * cfg.batch_size); ++i) {
          int family = noisy[i] ? 1 - label : label;
          lines.push_back(maker.make(rng, family, kBackground.size()));
          family_of[lines.back()] = family;
        }
        store.store(req, fp, b, format_batch(lines, b));
        ++written;
      }
    }

    // The pool is whatever replaying those fixtures produces.
    std::vector<std::string> exclude;
    for (const auto* p : {&corpus.human_train, &corpus.validation}) {
      for (const auto& r : *p) exclude.push_back(r.text);
    }
    auto gateway = Gateway::replay(fixtures.string(), 1);
    GenerationReport rep = generate_pool(pos_tpl, neg_tpl, cfg, *gateway, exclude);
    save_pool(rep.pool, (pools / ("pool-t" + format_double(t) + ".jsonl")).string());
    ++written;

    if (main) {
      for (std::size_t i = 0; i < rep.pool.size(); ++i) {
        const auto& sample = rep.pool[i];
        ChatRequest req = render_grading_prompt(grading_tpl, sample.text);
        store.store(req, fingerprint(req), 0, grading_reply(family_of.at(sample.text), i));
        ++written;
      }
    }
  }
  return written;
}

}  // namespace augmentor::demo
