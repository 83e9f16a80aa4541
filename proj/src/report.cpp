#include <map>
#include <sstream>

#include "augmentor/error.hpp"
#include "augmentor/experiments.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<const CurvePoint*> rows_of(const CurveTable& table) {
  std::vector<const CurvePoint*> rows{&table.baseline};
  for (const auto& c : table.curves) {
    for (const auto& p : c.points) rows.push_back(&p);
  }
  return rows;
}

ordered_json row_json(const CurvePoint& p) {
  ordered_json r;
  r["temperature"] = p.temperature ? ordered_json(*p.temperature) : ordered_json(nullptr);
  r["synthetic_count"] = p.synthetic_count;
  r["synthetic_ratio"] = p.synthetic_ratio;
  r["auc"] = p.auc;
  r["ci_low"] = p.ci_low;
  r["ci_high"] = p.ci_high;
  r["stop_epoch"] = p.stop_epoch;
  if (!p.phase_auc.empty()) {
    ordered_json ph = ordered_json::object();
    for (const auto& [k, v] : p.phase_auc) ph[k] = v;
    r["phase_auc"] = ph;
  }
  return r;
}

std::string dump(const ordered_json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace

std::string render_csv(const CurveTable& table) {
  std::ostringstream out;
  out << kReportCsvHeader << "\n";
  for (const CurvePoint* p : rows_of(table)) {
    out << (p->temperature ? format_double(*p->temperature) : "") << ',' << p->synthetic_count
        << ',' << format_double(p->synthetic_ratio) << ',' << format_double(p->auc) << ','
        << format_double(p->ci_low) << ',' << format_double(p->ci_high) << ',' << p->stop_epoch
        << "\n";
  }
  return out.str();
}

std::string render_json(const CurveTable& table) {
  ordered_json j;
  j["metadata"] = table.metadata;
  j["rows"] = ordered_json::array();
  for (const CurvePoint* p : rows_of(table)) j["rows"].push_back(row_json(*p));
  return dump(j);
}

std::vector<std::string> emit_report(const CurveTable& table, ReportFormat format,
                                     const std::string& path) {
  if (table.curves.empty()) throw PreconditionError("EmptyInput", "no curves to report");
  if (format == ReportFormat::kJson) {
    write_file(path, render_json(table));
    return {path};
  }
  write_file(path, render_csv(table));
  std::string meta = path + ".meta.json";
  write_file(meta, dump(table.metadata));
  return {path, meta};
}

CurveTable load_report_json(const std::string& path) {
  ordered_json j = ordered_json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("rows")) {
    throw PreconditionError("MalformedRecord", path + " is not a report");
  }
  CurveTable table;
  table.metadata = j.value("metadata", ordered_json::object());
  if (table.metadata.contains("retention")) {
    table.retention = table.metadata["retention"].get<double>();
  }
  std::map<double, AugmentationRun> curves;
  bool have_baseline = false;
  try {
    for (const auto& r : j.at("rows")) {
      CurvePoint p;
      if (!r.at("temperature").is_null()) p.temperature = r.at("temperature").get<double>();
      p.synthetic_count = r.at("synthetic_count").get<std::size_t>();
      p.synthetic_ratio = r.at("synthetic_ratio").get<double>();
      p.auc = r.at("auc").get<double>();
      p.ci_low = r.at("ci_low").get<double>();
      p.ci_high = r.at("ci_high").get<double>();
      p.stop_epoch = r.at("stop_epoch").get<int>();
      if (r.contains("phase_auc")) {
        p.phase_auc = r.at("phase_auc").get<std::map<std::string, double>>();
      }
      if (!p.temperature) {
        if (have_baseline) throw PreconditionError("MalformedRecord", "two baseline rows");
        table.baseline = p;
        have_baseline = true;
      } else {
        auto& run = curves[*p.temperature];
        run.temperature = *p.temperature;
        run.points.push_back(p);
      }
    }
  } catch (const ordered_json::exception& e) {
    throw PreconditionError("MalformedRecord", path + ": " + e.what());
  }
  if (!have_baseline) throw PreconditionError("MalformedRecord", path + ": no baseline row");
  for (auto& [t, run] : curves) table.curves.push_back(std::move(run));
  return table;
}

}  // namespace augmentor
