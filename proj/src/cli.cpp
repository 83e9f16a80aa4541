#include "augmentor/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <optional>

#include "augmentor/classifier.hpp"
#include "augmentor/consistency.hpp"
#include "augmentor/corpus.hpp"
#include "augmentor/error.hpp"
#include "augmentor/evaluation.hpp"
#include "augmentor/experiments.hpp"
#include "augmentor/external_trainer.hpp"
#include "augmentor/generator.hpp"
#include "augmentor/llm_gateway.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultSeed = 7;

// Missing or conflicting arguments; exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config-file values sit in sections ("training", "schedule", ...) or at the
// top level (section ""). Flags win over the file, the file over defaults.
class Resolver {
 public:
  Resolver() = default;
  explicit Resolver(json cfg) : cfg_(std::move(cfg)) {}

  template <class T>
  T get(const std::optional<T>& flag, const std::string& section, const std::string& key,
        T fallback) const {
    if (flag) return *flag;
    if (auto v = lookup(section, key)) {
      try {
        return v->get<T>();
      } catch (const json::exception&) {
        throw PreconditionError("InvalidConfig", where(section, key) + " has the wrong type");
      }
    }
    return fallback;
  }

  template <class T>
  std::optional<T> get_optional(const std::optional<T>& flag, const std::string& section,
                                const std::string& key) const {
    if (flag) return flag;
    if (auto v = lookup(section, key)) {
      try {
        return v->get<T>();
      } catch (const json::exception&) {
        throw PreconditionError("InvalidConfig", where(section, key) + " has the wrong type");
      }
    }
    return std::nullopt;
  }

  std::string path(const std::optional<std::string>& flag, const std::string& key,
                   const std::string& flag_name) const {
    auto p = get_optional<std::string>(flag, "paths", key);
    if (!p || p->empty()) throw UsageError("missing required option " + flag_name);
    return *p;
  }

 private:
  std::optional<json> lookup(const std::string& section, const std::string& key) const {
    const json* scope = &cfg_;
    if (!section.empty()) {
      auto s = cfg_.find(section);
      if (s == cfg_.end() || !s->is_object()) return std::nullopt;
      scope = &*s;
    }
    auto k = scope->find(key);
    if (k == scope->end() || k->is_null()) return std::nullopt;
    return *k;
  }

  static std::string where(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  json cfg_ = json::object();
};

Resolver load_config(const std::optional<std::string>& path) {
  if (!path) return Resolver();
  json j = json::parse(read_file(*path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw PreconditionError("InvalidConfig", *path + " is not a JSON object");
  }
  return Resolver(std::move(j));
}

struct Outcome {
  std::vector<std::string> outputs;
  std::uint64_t seed = kDefaultSeed;
};

// Flags shared by several subcommands.
struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
};

struct GatewayFlags {
  std::optional<std::string> fixtures;
  bool live = false;
  std::optional<std::string> record;
  std::optional<std::size_t> max_in_flight;
};

struct TrainingFlags {
  std::optional<double> lr;
  std::optional<int> patience;
  std::optional<int> max_epochs;
  std::optional<std::string> optimizer;
  std::optional<std::string> stopping_metric;
  std::optional<unsigned> hash_bits;
};

struct EvalFlags {
  std::optional<std::size_t> resamples;
  std::optional<double> ci_level;
};

struct ScheduleFlags {
  std::optional<std::size_t> increment;
  std::optional<std::size_t> max_synthetic;
  std::optional<int> epochs_per_increment;
  bool truncate = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON run configuration (flags take precedence)");
  app->add_option("--seed", f.seed, "Random seed (default 7)");
}

void add_gateway(CLI::App* app, GatewayFlags& f) {
  auto* fx = app->add_option("--fixtures", f.fixtures, "Replay recorded completions from DIR");
  auto* live = app->add_flag("--live", f.live, "Call the live chat-completion endpoint");
  auto* rec = app->add_option("--record", f.record, "Live mode, saving completions to DIR");
  fx->excludes(live)->excludes(rec);
  live->excludes(rec);
  app->add_option("--max-in-flight", f.max_in_flight, "Concurrent request bound (default 4)");
}

void add_training(CLI::App* app, TrainingFlags& f) {
  app->add_option("--lr", f.lr, "Learning rate");
  app->add_option("--patience", f.patience, "Early-stopping patience");
  app->add_option("--max-epochs", f.max_epochs, "Epoch cap per saturation run");
  app->add_option("--optimizer", f.optimizer, "sgd | adaptive_moments");
  app->add_option("--stopping-metric", f.stopping_metric, "accuracy | auc");
  app->add_option("--hash-bits", f.hash_bits, "Feature space is 2^bits");
}

void add_eval(CLI::App* app, EvalFlags& f) {
  app->add_option("--resamples", f.resamples, "Bootstrap resamples (default 1000)");
  app->add_option("--ci-level", f.ci_level, "Confidence level (default 0.95)");
}

void add_schedule(CLI::App* app, ScheduleFlags& f) {
  app->add_option("--increment", f.increment, "Synthetic samples added per step (default 25)");
  app->add_option("--max-synthetic", f.max_synthetic, "Synthetic samples at the last step");
  app->add_option("--epochs-per-increment", f.epochs_per_increment,
                  "Train a fixed number of epochs per step instead of to saturation");
  app->add_flag("--truncate", f.truncate, "Shorten the schedule when a pool is too small");
}

std::unique_ptr<Gateway> make_gateway(const GatewayFlags& f, const Resolver& cfg,
                                      std::ostream& err) {
  int chosen = (f.fixtures ? 1 : 0) + (f.live ? 1 : 0) + (f.record ? 1 : 0);
  if (chosen > 1) throw UsageError("--fixtures, --live and --record are mutually exclusive");
  std::string mode;
  std::string dir;
  if (chosen == 1) {
    mode = f.fixtures ? "replay" : f.live ? "live" : "record";
    dir = f.fixtures ? *f.fixtures : f.record ? *f.record : "";
  } else {
    mode = cfg.get<std::string>(std::nullopt, "gateway", "mode", "");
    dir = cfg.get<std::string>(std::nullopt, "gateway", "fixtures", "");
    if (mode.empty()) throw UsageError("choose one of --fixtures DIR, --live, --record DIR");
  }
  auto in_flight = cfg.get<std::size_t>(f.max_in_flight, "gateway", "max_in_flight", 4);
  if (mode == "replay") {
    if (dir.empty()) throw UsageError("replay mode needs a fixture directory");
    err << "gateway: replaying fixtures from " << dir << "\n";
    return Gateway::replay(dir, in_flight);
  }
  if (mode != "live" && mode != "record") {
    throw PreconditionError("InvalidConfig", "gateway.mode must be replay, live or record");
  }
  GatewayOptions opts = live_options_from_env();
  opts.mode = GatewayMode::kLive;
  opts.max_in_flight = in_flight;
  if (mode == "record") {
    if (dir.empty()) throw UsageError("record mode needs a fixture directory");
    opts.record = true;
    opts.fixture_dir = dir;
    fs::create_directories(dir);
  }
  err << "gateway: live requests to " << opts.endpoint_url
      << (opts.record ? " (recording to " + dir + ")" : "") << "\n";
  return std::make_unique<Gateway>(std::move(opts));
}

TrainingConfig resolve_training(const TrainingFlags& f, const Resolver& cfg, std::uint64_t seed) {
  TrainingConfig t;
  t.learning_rate = cfg.get(f.lr, "training", "learning_rate", t.learning_rate);
  t.patience = cfg.get(f.patience, "training", "patience", t.patience);
  t.max_epochs = cfg.get(f.max_epochs, "training", "max_epochs", t.max_epochs);
  t.optimizer = parse_optimizer(
      cfg.get<std::string>(f.optimizer, "training", "optimizer", std::string(to_string(t.optimizer))));
  t.stopping_metric = parse_stopping_metric(cfg.get<std::string>(
      f.stopping_metric, "training", "stopping_metric", std::string(to_string(t.stopping_metric))));
  t.hash_bits = cfg.get(f.hash_bits, "training", "hash_bits", t.hash_bits);
  t.seed = cfg.get<std::uint64_t>(std::nullopt, "training", "seed", seed);
  validate(t);
  return t;
}

EvalSettings resolve_eval(const EvalFlags& f, const Resolver& cfg, std::uint64_t seed) {
  EvalSettings e;
  e.n_resamples = cfg.get(f.resamples, "evaluation", "n_resamples", e.n_resamples);
  e.ci_level = cfg.get(f.ci_level, "evaluation", "ci_level", e.ci_level);
  e.seed = cfg.get<std::uint64_t>(std::nullopt, "evaluation", "seed", seed);
  return e;
}

ScheduleConfig resolve_schedule(const ScheduleFlags& f, const Resolver& cfg, std::uint64_t seed) {
  ScheduleConfig s;
  s.increment = cfg.get(f.increment, "schedule", "increment", s.increment);
  s.max_synthetic = cfg.get(f.max_synthetic, "schedule", "max_synthetic", s.max_synthetic);
  s.temperatures = cfg.get(std::optional<std::vector<double>>{}, "schedule", "temperatures",
                           s.temperatures);
  s.epochs_per_increment =
      cfg.get_optional(f.epochs_per_increment, "schedule", "epochs_per_increment");
  s.truncate_short_pool =
      f.truncate || cfg.get<bool>(std::nullopt, "schedule", "truncate_short_pool", false);
  s.use_filtered_pool = cfg.get<bool>(std::nullopt, "schedule", "use_filtered_pool", false);
  s.seed = cfg.get<std::uint64_t>(std::nullopt, "schedule", "seed", seed);
  validate(s);
  return s;
}

ReportFormat resolve_format(const std::optional<std::string>& flag, const std::string& out) {
  std::string f = flag ? *flag : (fs::path(out).extension() == ".json" ? "json" : "csv");
  if (f == "csv") return ReportFormat::kCsv;
  if (f == "json") return ReportFormat::kJson;
  throw UsageError("--format must be csv or json");
}

PromptTemplate template_or(const std::optional<std::string>& path, PromptTemplate fallback) {
  return path ? load_template(*path) : std::move(fallback);
}

std::vector<std::string> human_texts(const Corpus& corpus) {
  std::vector<std::string> texts;
  for (const auto* pool : {&corpus.human_train, &corpus.validation}) {
    for (const auto& r : *pool) texts.push_back(r.text);
  }
  return texts;
}

double pool_temperature(const Pool& pool, const std::string& path) {
  if (pool.empty()) throw PreconditionError("EmptyInput", path + " holds no samples");
  std::optional<double> t;
  for (const auto& r : pool) {
    if (r.source != Source::kSynthetic || !r.temperature) {
      throw PreconditionError("MalformedRecord", path + ": " + r.id + " is not a synthetic sample");
    }
    if (t && *t != *r.temperature) {
      throw PreconditionError("MixedTemperature", path + " mixes temperatures");
    }
    t = r.temperature;
  }
  return *t;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct PoolSet {
  std::map<double, Pool> pools;
  std::map<double, std::string> files;
};

// Every "*.jsonl" in dir is a pool (or only "*.filtered.jsonl" when
// filtered is set), keyed by its records' temperature.
PoolSet load_pools_dir(const std::string& dir, bool filtered) {
  if (!fs::is_directory(dir)) throw PreconditionError("FileNotFound", dir + " is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !ends_with(name, ".jsonl")) continue;
    if (ends_with(name, ".filtered.jsonl") != filtered) continue;
    names.push_back(entry.path().string());
  }
  std::sort(names.begin(), names.end());
  PoolSet set;
  for (const auto& path : names) {
    Pool pool = load_pool(path);
    double t = pool_temperature(pool, path);
    if (set.pools.count(t)) {
      throw PreconditionError("DuplicatePool", "two pools at temperature " + format_double(t) +
                                                   ": " + set.files[t] + ", " + path);
    }
    set.pools[t] = std::move(pool);
    set.files[t] = path;
  }
  return set;
}

void print_curves(const CurveTable& table, std::ostream& err) {
  err << "baseline auc " << format_double(table.baseline.auc) << " stop_epoch "
      << table.baseline.stop_epoch << "\n";
  for (const auto& c : table.curves) {
    for (const auto& w : c.warnings) err << "warning: " << w << "\n";
    const CurvePoint* best = &table.baseline;
    for (const auto& p : c.points) {
      if (p.auc > best->auc) best = &p;
    }
    err << "temperature " << format_double(c.temperature) << ": " << c.points.size()
        << " points, best auc " << format_double(best->auc) << " at " << best->synthetic_count
        << " synthetic\n";
  }
}

// ---- subcommands -----------------------------------------------------------

struct GenerateArgs {
  CommonFlags common;
  GatewayFlags gateway;
  std::optional<std::string> pos, neg, corpus, out, model;
  std::optional<double> temperature;
  std::optional<std::size_t> per_label, batch_size;
  std::optional<int> max_tokens;
  bool strict = false;
};

GenerationConfig resolve_generation(const GenerateArgs& a, const Resolver& cfg, std::uint64_t seed) {
  GenerationConfig g;
  g.temperature = cfg.get(a.temperature, "generation", "temperature", g.temperature);
  g.n_total_per_label = cfg.get(a.per_label, "generation", "n_total_per_label", g.n_total_per_label);
  g.batch_size = cfg.get(a.batch_size, "generation", "batch_size", g.batch_size);
  g.max_tokens = cfg.get(a.max_tokens, "generation", "max_tokens", g.max_tokens);
  g.model_name = cfg.get(a.model, "generation", "model_name", g.model_name);
  g.strict = a.strict || cfg.get<bool>(std::nullopt, "generation", "strict", false);
  g.seed = seed;
  if (g.n_total_per_label == 0) throw UsageError("missing required option --per-label");
  validate(g);
  return g;
}

Outcome run_generate(const GenerateArgs& a, std::ostream& err, bool record_only = false) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  GenerationConfig g = resolve_generation(a, cfg, seed);
  auto pos = template_or(cfg.get_optional(a.pos, "paths", "pos_template"), default_positive_template());
  auto neg = template_or(cfg.get_optional(a.neg, "paths", "neg_template"), default_negative_template());
  std::string out = record_only ? a.out.value_or("") : cfg.path(a.out, "pool", "--out");

  std::vector<std::string> exclude;
  if (auto corpus = cfg.get_optional(a.corpus, "paths", "corpus")) {
    exclude = human_texts(load_corpus(*corpus));
  }
  auto gateway = make_gateway(a.gateway, cfg, err);
  err << "generating " << g.n_total_per_label << " per label at temperature "
      << format_double(g.temperature) << "\n";
  GenerationReport rep = generate_pool(pos, neg, g, *gateway, exclude);
  for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
  err << rep.pool.size() << " samples from " << rep.requests << " requests; shortfall "
      << rep.shortfall_pos << " positive, " << rep.shortfall_neg << " negative; "
      << rep.duplicates_dropped << " duplicates and " << rep.leaked_dropped << " leaked dropped\n";
  Outcome o{{}, seed};
  if (!out.empty()) {
    save_pool(rep.pool, out);
    o.outputs.push_back(out);
  }
  return o;
}

struct GradeArgs {
  CommonFlags common;
  GatewayFlags gateway;
  std::optional<std::string> pool, rubric, out, metrics, model;
};

Outcome run_grade(const GradeArgs& a, std::ostream& err, bool record_only = false) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  std::string pool_path = cfg.path(a.pool, "pool", "--pool");
  std::string out = record_only ? a.out.value_or("") : cfg.path(a.out, "records", "--out");
  auto rubric =
      template_or(cfg.get_optional(a.rubric, "paths", "rubric"), default_grading_template());
  std::string model = cfg.get<std::string>(a.model, "generation", "model_name", kDefaultModel);

  Pool pool = load_pool(pool_path);
  auto gateway = make_gateway(a.gateway, cfg, err);
  err << "grading " << pool.size() << " samples\n";
  auto records = grade_pool(pool, rubric, *gateway, model);
  Outcome o{{}, seed};
  if (!out.empty()) {
    save_records(records, out);
    o.outputs.push_back(out);
  }
  std::size_t unparsed = std::count_if(records.begin(), records.end(),
                                       [](const ConsistencyRecord& r) { return !r.parse_ok; });
  err << unparsed << " gradings could not be parsed\n";
  if (unparsed < records.size()) {
    AgreementReport m = agreement_metrics(records);
    err << "agreement: accuracy " << format_double(m.accuracy) << ", precision "
        << format_double(m.precision) << ", recall " << format_double(m.recall) << "\n";
    if (a.metrics) {
      ordered_json j;
      j["n"] = m.n;
      j["confusion"] = {{"tp", m.confusion.tp}, {"fn", m.confusion.fn},
                        {"fp", m.confusion.fp}, {"tn", m.confusion.tn}};
      j["accuracy"] = m.accuracy;
      j["precision"] = m.precision;
      j["recall"] = m.recall;
      j["f1"] = m.f1;
      j["kappa"] = m.kappa ? ordered_json(*m.kappa) : ordered_json(nullptr);
      j["unparsed"] = unparsed;
      write_file(*a.metrics, j.dump(2) + "\n");
      o.outputs.push_back(*a.metrics);
    }
  }
  return o;
}

struct FilterArgs {
  CommonFlags common;
  std::optional<std::string> pool, records, out, manifest;
};

Outcome run_filter(const FilterArgs& a, std::ostream& err) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  Pool pool = load_pool(cfg.path(a.pool, "pool", "--pool"));
  auto records = load_records(cfg.path(a.records, "records", "--records"));
  std::string out = cfg.path(a.out, "filtered_pool", "--out");
  FilterResult r = filter_inconsistent(pool, records);
  save_pool(r.retained, out);
  Outcome o{{out}, seed};
  if (auto manifest = cfg.get_optional(a.manifest, "paths", "manifest")) {
    save_manifest(r.removed, *manifest);
    o.outputs.push_back(*manifest);
  }
  err << "retained " << r.retained.size() << " of " << pool.size() << " ("
      << format_double(r.retention()) << ")\n";
  return o;
}

struct TrainBaselineArgs {
  CommonFlags common;
  TrainingFlags training;
  EvalFlags eval;
  std::optional<std::string> corpus, out, adapter;
  std::optional<double> adapter_timeout;
};

Outcome run_train_baseline(const TrainBaselineArgs& a, std::ostream& err) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  Corpus corpus = load_corpus(cfg.path(a.corpus, "corpus", "--corpus"));
  std::string out = cfg.path(a.out, "model", "--out");
  EvalSettings eval = resolve_eval(a.eval, cfg, seed);

  if (auto adapter = cfg.get_optional(a.adapter, "adapter", "command")) {
    AdapterOptions opts;
    opts.argv = split_command_line(*adapter);
    opts.config.seed = seed;
    opts.config.learning_rate = cfg.get(a.training.lr, "adapter", "learning_rate", opts.config.learning_rate);
    opts.config.patience = cfg.get(a.training.patience, "adapter", "patience", opts.config.patience);
    opts.config.max_epochs = cfg.get(a.training.max_epochs, "adapter", "max_epochs", opts.config.max_epochs);
    opts.config.stopping_metric =
        cfg.get(a.training.stopping_metric, "adapter", "stopping_metric", opts.config.stopping_metric);
    auto timeout = cfg.get(a.adapter_timeout, "adapter", "timeout_seconds", 3600.0);
    opts.timeout = std::chrono::milliseconds(static_cast<long long>(timeout * 1000.0));
    if (corpus.human_train.empty()) throw PreconditionError("EmptyInput", "human_train is empty");
    err << "training external adapter: " << *adapter << "\n";
    auto probs = external_trainer_roundtrip(opts, corpus.human_train, corpus.validation);
    std::vector<int> labels;
    for (const auto& r : corpus.validation) labels.push_back(r.label);
    EvalResult res = bootstrap_auc(probs, labels, eval.n_resamples, eval.ci_level, eval.seed);
    ordered_json j;
    j["trainer"] = "external";
    j["auc"] = res.auc;
    j["ci_low"] = res.ci_low;
    j["ci_high"] = res.ci_high;
    j["adapter_config"] = to_json(opts.config);
    j["valid_probs"] = probs;
    write_file(out, j.dump(2) + "\n");
    err << "adapter baseline auc " << format_double(res.auc) << "\n";
    return {{out}, seed};
  }

  TrainingConfig t = resolve_training(a.training, cfg, seed);
  BaselineResult b = run_baseline(corpus, t, eval);
  save_model(b.model, out);
  err << "baseline auc " << format_double(b.point.auc) << " [" << format_double(b.point.ci_low)
      << ", " << format_double(b.point.ci_high) << "], stopped after epoch "
      << b.point.stop_epoch << "\n";
  return {{out}, seed};
}

struct AugmentArgs {
  CommonFlags common;
  TrainingFlags training;
  EvalFlags eval;
  ScheduleFlags schedule;
  std::optional<std::string> corpus, pool, pools_dir, out, format, temps;
  bool filtered = false;
};

ordered_json run_config_json(const std::string& cmd, std::uint64_t seed, const ScheduleConfig& s,
                             const TrainingConfig& t, const EvalSettings& e,
                             const ordered_json& inputs) {
  ordered_json j;
  j["command"] = cmd;
  j["seed"] = seed;
  j["schedule"] = to_json(s);
  j["training"] = to_json(t);
  j["evaluation"] = to_json(e);
  j["inputs"] = inputs;
  return j;
}

Outcome run_augment(const AugmentArgs& a, std::ostream& err) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  std::string corpus_path = cfg.path(a.corpus, "corpus", "--corpus");
  std::string pool_path = cfg.path(a.pool, "pool", "--pool");
  std::string out = cfg.path(a.out, "report", "--out");
  auto format = resolve_format(a.format, out);
  TrainingConfig t = resolve_training(a.training, cfg, seed);
  EvalSettings e = resolve_eval(a.eval, cfg, seed);
  ScheduleConfig s = resolve_schedule(a.schedule, cfg, seed);

  Corpus corpus = load_corpus(corpus_path);
  Pool pool = load_pool(pool_path);
  double temp = pool_temperature(pool, pool_path);
  s.temperatures = {temp};
  err << "augmenting with " << s.max_synthetic << " samples at temperature "
      << format_double(temp) << "\n";
  CurveTable table = run_experiment_2(corpus, {{temp, pool}}, s, t, e);
  table.metadata["run_config"] =
      run_config_json("augment", seed, s, t, e, {{"corpus", corpus_path}, {"pool", pool_path}});
  print_curves(table, err);
  return {emit_report(table, format, out), seed};
}

Outcome run_sweep(const AugmentArgs& a, std::ostream& err) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  std::string corpus_path = cfg.path(a.corpus, "corpus", "--corpus");
  std::string dir = cfg.path(a.pools_dir, "pools_dir", "--pools-dir");
  std::string out = cfg.path(a.out, "report", "--out");
  auto format = resolve_format(a.format, out);
  TrainingConfig t = resolve_training(a.training, cfg, seed);
  EvalSettings e = resolve_eval(a.eval, cfg, seed);
  ScheduleConfig s = resolve_schedule(a.schedule, cfg, seed);
  if (a.temps) {
    s.temperatures.clear();
    for (const auto& piece : CLI::detail::split(*a.temps, ',')) {
      try {
        std::size_t used = 0;
        s.temperatures.push_back(std::stod(piece, &used));
        if (used != piece.size()) throw std::invalid_argument(piece);
      } catch (const std::exception&) {
        throw UsageError("--temps expects comma-separated numbers, got '" + *a.temps + "'");
      }
    }
  }
  bool filtered = a.filtered || s.use_filtered_pool;
  s.use_filtered_pool = filtered;

  Corpus corpus = load_corpus(corpus_path);
  PoolSet pools = load_pools_dir(dir, filtered);
  ordered_json inputs = {{"corpus", corpus_path}, {"pools_dir", dir}};
  CurveTable table;
  if (filtered) {
    s.truncate_short_pool = true;
    PoolSet originals = load_pools_dir(dir, false);
    table = run_experiment_2(corpus, pools.pools, s, t, e);
    ordered_json retention = ordered_json::object();
    for (const auto& run : table.curves) {
      auto it = originals.pools.find(run.temperature);
      if (it == originals.pools.end() || it->second.empty()) continue;
      double r = static_cast<double>(pools.pools.at(run.temperature).size()) /
                 static_cast<double>(it->second.size());
      retention[format_double(run.temperature)] = {
          {"retained", pools.pools.at(run.temperature).size()},
          {"unfiltered", it->second.size()},
          {"retention", r}};
      if (table.curves.size() == 1) table.retention = r;
      err << "temperature " << format_double(run.temperature) << ": retention "
          << format_double(r) << "\n";
    }
    table.metadata["retention"] = retention;
  } else {
    table = run_experiment_2(corpus, pools.pools, s, t, e);
  }
  table.metadata["run_config"] = run_config_json("sweep", seed, s, t, e, inputs);
  print_curves(table, err);
  return {emit_report(table, format, out), seed};
}

struct ReportArgs {
  CommonFlags common;
  std::optional<std::string> in, out, format;
};

Outcome run_report(const ReportArgs& a, std::ostream& err) {
  Resolver cfg = load_config(a.common.config);
  std::uint64_t seed = cfg.get(a.common.seed, "", "seed", kDefaultSeed);
  std::string in = cfg.path(a.in, "report_json", "--in");
  std::string out = cfg.path(a.out, "report", "--out");
  CurveTable table = load_report_json(in);
  err << "converted " << table.row_count() << " rows\n";
  return {emit_report(table, resolve_format(a.format, out), out), seed};
}

struct RecordArgs {
  GenerateArgs gen;
  GradeArgs grade;
  std::optional<std::string> out, pool, rubric, pool_out, records_out;
};

Outcome run_record(RecordArgs& a, std::ostream& err) {
  if (!a.out) throw UsageError("missing required option --out");
  // Recording always goes through the live endpoint.
  GatewayFlags gw;
  gw.record = a.out;
  gw.max_in_flight = a.gen.gateway.max_in_flight;
  Outcome o;
  if (a.pool) {
    a.grade.common = a.gen.common;
    a.grade.gateway = gw;
    a.grade.pool = a.pool;
    a.grade.rubric = a.rubric;
    a.grade.out = a.records_out;
    a.grade.model = a.gen.model;
    o = run_grade(a.grade, err, true);
  } else {
    a.gen.gateway = gw;
    a.gen.out = a.pool_out;
    o = run_generate(a.gen, err, true);
  }
  o.outputs.insert(o.outputs.begin(), *a.out);
  return o;
}

void print_summary(std::ostream& out, const std::string& cmd, const std::string& status,
                   const Outcome& o, const std::optional<std::pair<std::string, std::string>>& error) {
  ordered_json j;
  j["cmd"] = cmd;
  j["status"] = status;
  j["outputs"] = o.outputs;
  j["seed"] = o.seed;
  if (error) j["error"] = {{"kind", error->first}, {"message", error->second}};
  out << j.dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Augment text-classification data with LLM-generated samples", "augmentor"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic pool from templates");
  add_common(generate, gen.common);
  add_gateway(generate, gen.gateway);
  generate->add_option("--pos", gen.pos, "Positive-class template (default: built-in)");
  generate->add_option("--neg", gen.neg, "Negative-class template (default: built-in)");
  generate->add_option("--temperature", gen.temperature, "Sampling temperature");
  generate->add_option("--per-label", gen.per_label, "Samples per class");
  generate->add_option("--batch-size", gen.batch_size, "Samples requested per call (default 10)");
  generate->add_option("--max-tokens", gen.max_tokens, "Completion token cap");
  generate->add_option("--model", gen.model, "Model name");
  generate->add_option("--corpus", gen.corpus, "Human corpus; its texts are never emitted");
  generate->add_flag("--strict", gen.strict, "Re-request short classes up to two more rounds");
  generate->add_option("--out", gen.out, "Pool JSONL to write");

  GradeArgs grd;
  auto* grade = app.add_subcommand("grade", "Self-grade a pool against the rubric");
  add_common(grade, grd.common);
  add_gateway(grade, grd.gateway);
  grade->add_option("--pool", grd.pool, "Pool JSONL");
  grade->add_option("--rubric", grd.rubric, "Grading template (default: built-in)");
  grade->add_option("--model", grd.model, "Model name");
  grade->add_option("--out", grd.out, "Consistency records JSONL to write");
  grade->add_option("--metrics", grd.metrics, "Also write agreement metrics JSON");

  FilterArgs flt;
  auto* filter = app.add_subcommand("filter", "Drop samples whose grade contradicts their label");
  add_common(filter, flt.common);
  filter->add_option("--pool", flt.pool, "Pool JSONL");
  filter->add_option("--records", flt.records, "Consistency records JSONL");
  filter->add_option("--out", flt.out, "Filtered pool JSONL to write");
  filter->add_option("--manifest", flt.manifest, "Removed-sample manifest JSONL to write");

  TrainBaselineArgs tb;
  auto* train = app.add_subcommand("train-baseline", "Train on human data only");
  add_common(train, tb.common);
  add_training(train, tb.training);
  add_eval(train, tb.eval);
  train->add_option("--corpus", tb.corpus, "Corpus JSONL or CSV");
  train->add_option("--out", tb.out, "Model checkpoint (or adapter result) JSON to write");
  train->add_option("--adapter", tb.adapter, "External trainer command line");
  train->add_option("--adapter-timeout", tb.adapter_timeout, "Adapter timeout in seconds");

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Augmentation curve for one pool");
  add_common(augment, aug.common);
  add_training(augment, aug.training);
  add_eval(augment, aug.eval);
  add_schedule(augment, aug.schedule);
  augment->add_option("--corpus", aug.corpus, "Corpus JSONL or CSV");
  augment->add_option("--pool", aug.pool, "Pool JSONL");
  augment->add_option("--out", aug.out, "Report file");
  augment->add_option("--format", aug.format, "csv | json (default from extension)");

  AugmentArgs swp;
  auto* sweep = app.add_subcommand("sweep", "Augmentation curves for several temperatures");
  add_common(sweep, swp.common);
  add_training(sweep, swp.training);
  add_eval(sweep, swp.eval);
  add_schedule(sweep, swp.schedule);
  sweep->add_option("--corpus", swp.corpus, "Corpus JSONL or CSV");
  sweep->add_option("--pools-dir", swp.pools_dir, "Directory of pool JSONL files");
  sweep->add_option("--temps", swp.temps, "Comma-separated temperatures");
  sweep->add_flag("--filtered", swp.filtered, "Use the *.filtered.jsonl pools");
  sweep->add_option("--out", swp.out, "Report file");
  sweep->add_option("--format", swp.format, "csv | json (default from extension)");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Rewrite a JSON report as CSV or JSON");
  add_common(report, rep.common);
  report->add_option("--in", rep.in, "JSON report");
  report->add_option("--out", rep.out, "Report file");
  report->add_option("--format", rep.format, "csv | json (default from extension)");

  RecordArgs rec;
  auto* record = app.add_subcommand(
      "record-fixtures", "Call the live endpoint and save completions for offline replay");
  add_common(record, rec.gen.common);
  record->add_option("--out", rec.out, "Fixture directory");
  record->add_option("--max-in-flight", rec.gen.gateway.max_in_flight, "Concurrent request bound");
  record->add_option("--pos", rec.gen.pos, "Positive-class template");
  record->add_option("--neg", rec.gen.neg, "Negative-class template");
  record->add_option("--temperature", rec.gen.temperature, "Sampling temperature");
  record->add_option("--per-label", rec.gen.per_label, "Samples per class");
  record->add_option("--batch-size", rec.gen.batch_size, "Samples requested per call");
  record->add_option("--model", rec.gen.model, "Model name");
  record->add_option("--corpus", rec.gen.corpus, "Human corpus; its texts are never emitted");
  record->add_flag("--strict", rec.gen.strict, "Re-request short classes");
  record->add_option("--pool-out", rec.pool_out, "Also write the generated pool");
  record->add_option("--pool", rec.pool, "Record gradings for this pool instead");
  record->add_option("--rubric", rec.rubric, "Grading template");
  record->add_option("--records-out", rec.records_out, "Also write the consistency records");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("augmentor");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'augmentor --help' for usage\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  std::uint64_t seed = kDefaultSeed;
  try {
    Outcome o;
    if (sub == generate) o = run_generate(gen, err);
    else if (sub == grade) o = run_grade(grd, err);
    else if (sub == filter) o = run_filter(flt, err);
    else if (sub == train) o = run_train_baseline(tb, err);
    else if (sub == augment) o = run_augment(aug, err);
    else if (sub == sweep) o = run_sweep(swp, err);
    else if (sub == report) o = run_report(rep, err);
    else o = run_record(rec, err);
    print_summary(out, cmd, "ok", o, std::nullopt);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    print_summary(out, cmd, "error", {{}, seed}, std::make_pair("UsageError", e.what()));
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    print_summary(out, cmd, "error", {{}, seed}, std::make_pair(e.kind(), e.detail()));
    return e.category() == ErrorCategory::kExternal ? kExitExternal : kExitPrecondition;
  } catch (const std::exception& e) {
    // Filesystem and JSON library failures are input problems.
    err << "error: " << e.what() << "\n";
    print_summary(out, cmd, "error", {{}, seed}, std::make_pair("InvalidInput", e.what()));
    return kExitPrecondition;
  }
}

}  // namespace augmentor
