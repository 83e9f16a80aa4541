#include <doctest.h>

#include <algorithm>
#include <set>

#include "augmentor/experiments.hpp"
#include "augmentor/text_util.hpp"
#include "demo_data.hpp"
#include "test_support.hpp"

using namespace augmentor;
using test_support::error_kind;
using test_support::source_path;
using test_support::TempDir;

namespace {

const Corpus& corpus() {
  static const Corpus c = load_corpus(source_path("data/demo/corpus.jsonl"));
  return c;
}

const std::map<double, Pool>& pools() {
  static const std::map<double, Pool> p = [] {
    std::map<double, Pool> out;
    for (double t : {0.3, 0.5, 0.7, 1.0}) {
      out[t] = load_pool(source_path("data/demo/pools/pool-t" + format_double(t) + ".jsonl"));
    }
    return out;
  }();
  return p;
}

EvalSettings quick_eval() {
  EvalSettings e;
  e.n_resamples = 200;
  return e;
}

}  // namespace

TEST_CASE("baseline on the demo corpus") {
  TrainingConfig cfg;
  auto b = run_baseline(corpus(), cfg, quick_eval());
  CHECK(b.point.synthetic_count == 0);
  CHECK(b.point.synthetic_ratio == 0.0);
  CHECK(!b.point.temperature);
  CHECK(b.point.ci_low <= b.point.auc);
  CHECK(b.point.auc <= b.point.ci_high);
  CHECK(b.point.stop_epoch >= 1);
  CHECK(b.point.phase_auc.count("predict") == 1);
  CHECK(b.point.phase_auc.count("explain") == 1);
}

TEST_CASE("baseline on a separable corpus is near perfect") {
  demo::DemoLayout layout;
  layout.human_noise = 0;
  layout.validation_noise = 0;
  layout.seen_keywords = 16;
  layout.human_train = 120;
  auto c = demo::demo_corpus(layout);
  auto b = run_baseline(c, TrainingConfig{}, quick_eval());
  CHECK(b.point.auc >= 0.95);
}

TEST_CASE("baseline preconditions") {
  Corpus empty = corpus();
  empty.human_train.clear();
  CHECK(error_kind([&] { run_baseline(empty, TrainingConfig{}); }) == "EmptyInput");
  Corpus one_class = corpus();
  std::erase_if(one_class.validation, [](const auto& r) { return r.label == 0; });
  CHECK(error_kind([&] { run_baseline(one_class, TrainingConfig{}); }) == "SingleClass");
}

TEST_CASE("augmentation: cumulative draws, ratios, isolation") {
  TrainingConfig cfg;
  ScheduleConfig sched;
  auto base = run_baseline(corpus(), cfg, quick_eval());
  const Pool& pool = pools().at(0.5);
  auto run = run_augmentation(base.model, corpus(), pool, 0.5, sched, cfg, quick_eval());
  REQUIRE(run.points.size() == 10);
  REQUIRE(run.drawn_ids.size() == 10);
  CHECK(run.warnings.empty());

  std::set<std::string> validation_ids;
  for (const auto& r : corpus().validation) validation_ids.insert(r.id);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto& p = run.points[k];
    CHECK(p.synthetic_count == 25 * (k + 1));
    CHECK(p.temperature == 0.5);
    const double expected = static_cast<double>(p.synthetic_count) /
                            static_cast<double>(p.synthetic_count + corpus().human_train.size());
    CHECK(std::abs(p.synthetic_ratio - expected) <= 1e-12);
    CHECK(p.ci_low <= p.auc);
    CHECK(p.auc <= p.ci_high);

    const auto& ids = run.drawn_ids[k];
    CHECK(ids.size() == p.synthetic_count);
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());
    if (k > 0) {
      const auto& prev = run.drawn_ids[k - 1];
      CHECK(std::equal(prev.begin(), prev.end(), ids.begin()));
    }
    for (const auto& id : ids) CHECK(validation_ids.count(id) == 0);
  }
  CHECK(std::abs(run.points[7].synthetic_ratio - 200.0 / 251.0) <= 1e-12);
  CHECK(std::abs(run.points[9].synthetic_ratio - 250.0 / 301.0) <= 1e-12);
}

TEST_CASE("augmentation: validation samples in the pool are rejected") {
  TrainingConfig cfg;
  ScheduleConfig sched;
  sched.max_synthetic = 50;
  auto base = run_baseline(corpus(), cfg, quick_eval());
  Pool leaky = pools().at(0.3);
  leaky.resize(50);
  leaky[10] = corpus().validation[0];
  CHECK(error_kind([&] { run_augmentation(base.model, corpus(), leaky, 0.3, sched, cfg, quick_eval()); }) ==
        "ValidationLeak");
}

TEST_CASE("augmentation: short pools and uneven blocks") {
  TrainingConfig cfg;
  auto base = run_baseline(corpus(), cfg, quick_eval());
  Pool small = pools().at(0.3);
  small.resize(60);
  ScheduleConfig sched;
  CHECK(error_kind([&] { run_augmentation(base.model, corpus(), small, 0.3, sched, cfg, quick_eval()); }) ==
        "InsufficientPool");

  sched.truncate_short_pool = true;
  auto run = run_augmentation(base.model, corpus(), small, 0.3, sched, cfg, quick_eval());
  REQUIRE(run.points.size() == 3);
  CHECK(run.points.back().synthetic_count == 60);
  CHECK(run.warnings.size() == 2);  // truncated schedule + short last block

  sched = {};
  sched.max_synthetic = 60;
  sched.epochs_per_increment = 2;
  auto fixed = run_augmentation(base.model, corpus(), pools().at(0.3), 0.3, sched, cfg, quick_eval());
  REQUIRE(fixed.points.size() == 3);
  for (const auto& p : fixed.points) CHECK(p.stop_epoch == 2);

  sched.increment = 0;
  CHECK(error_kind([&] { run_augmentation(base.model, corpus(), small, 0.3, sched, cfg); }) ==
        "InvalidConfig");
}

TEST_CASE("experiment 2: 4 temperatures give 41 rows and a deterministic report") {
  TrainingConfig cfg;
  ScheduleConfig sched;
  auto a = run_experiment_2(corpus(), pools(), sched, cfg, quick_eval());
  CHECK(a.row_count() == 41);
  REQUIRE(a.curves.size() == 4);
  CHECK(a.curves[0].temperature == 0.3);
  CHECK(a.curves[3].temperature == 1.0);
  CHECK(a.metadata["pool_hashes"].size() == 4);
  CHECK(a.metadata["human_train_size"] == 51);

  auto csv = render_csv(a);
  CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n,0,0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 42);

  auto b = run_experiment_2(corpus(), pools(), sched, cfg, quick_eval());
  CHECK(render_csv(b) == csv);
  CHECK(render_json(b) == render_json(a));

  // Each branch equals a standalone run from the same baseline.
  auto base = run_baseline(corpus(), cfg, quick_eval());
  auto solo = run_augmentation(base.model, corpus(), pools().at(0.7), 0.7, sched, cfg, quick_eval());
  for (std::size_t k = 0; k < solo.points.size(); ++k) CHECK(solo.points[k].auc == a.curves[2].points[k].auc);
}

TEST_CASE("experiment 2: missing pool and empty temperature list") {
  ScheduleConfig sched;
  auto partial = pools();
  partial.erase(0.7);
  CHECK(error_kind([&] { run_experiment_2(corpus(), partial, sched, TrainingConfig{}); }) == "MissingPool");
  sched.temperatures.clear();
  CHECK(error_kind([&] { run_experiment_2(corpus(), pools(), sched, TrainingConfig{}); }) == "InvalidConfig");
}

TEST_CASE("experiment 3 on a fully consistent pool matches experiment 2") {
  TrainingConfig cfg;
  ScheduleConfig sched;
  sched.temperatures = {0.5};
  const Pool& pool = pools().at(0.5);
  auto two = run_experiment_2(corpus(), pools(), sched, cfg, quick_eval());
  auto three = run_experiment_3(corpus(), pool, 0.5, pool.size(), sched, cfg, quick_eval());
  REQUIRE(three.curves.size() == 1);
  CHECK(three.retention == 1.0);
  CHECK(three.metadata["retained"] == 1000);
  CHECK(three.baseline.auc == two.baseline.auc);
  for (std::size_t k = 0; k < 10; ++k) CHECK(three.curves[0].points[k].auc == two.curves[0].points[k].auc);
}

TEST_CASE("reports: CSV sidecar, JSON round-trip, empty table") {
  TempDir dir;
  TrainingConfig cfg;
  ScheduleConfig sched;
  sched.temperatures = {0.3, 1.0};
  sched.max_synthetic = 50;
  auto table = run_experiment_2(corpus(), pools(), sched, cfg, quick_eval());

  auto written = emit_report(table, ReportFormat::kCsv, dir.file("r.csv"));
  CHECK(written == std::vector<std::string>{dir.file("r.csv"), dir.file("r.csv.meta.json")});
  CHECK(read_file(dir.file("r.csv")) == render_csv(table));
  CHECK(nlohmann::json::parse(read_file(dir.file("r.csv.meta.json")))["schedule"]["max_synthetic"] == 50);

  emit_report(table, ReportFormat::kJson, dir.file("r.json"));
  auto loaded = load_report_json(dir.file("r.json"));
  CHECK(render_csv(loaded) == render_csv(table));
  CHECK(render_json(loaded) == render_json(table));

  CurveTable empty;
  CHECK(error_kind([&] { emit_report(empty, ReportFormat::kCsv, dir.file("e.csv")); }) == "EmptyInput");
  write_file(dir.file("bad.json"), "{\"rows\": []}");
  CHECK(error_kind([&] { load_report_json(dir.file("bad.json")); }) == "MalformedRecord");
}
