#pragma once

// Open-vocabulary set metrics.
//
// Predicted and ground-truth labels are mapped to synonym groups P and G.
//   accuracy = |P ∩ G| / |P|   (0 when P is empty)
//   recall   = |P ∩ G| / |G|
//   avg      = (accuracy + recall) / 2
// Reports macro-average per-sample values in input order.

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/labelspace.hpp"

namespace ovemo {

struct SampleMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double avg = 0.0;

  bool operator==(const SampleMetrics&) const = default;
};

inline double combine_avg(double accuracy, double recall) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };  // false for NaN
  if (!in_unit(accuracy) || !in_unit(recall)) {
    throw Error(ErrorCode::kOutOfRange, "accuracy and recall must lie in [0, 1]");
  }
  return (accuracy + recall) / 2.0;
}

inline SampleMetrics ov_sample_metrics(const LabelSet& pred, const LabelSet& gt,
                                       const SynonymLexicon& lexicon) {
  if (gt.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "ground truth label set is empty");
  if (pred.empty()) return {0.0, 0.0, 0.0};
  const auto p = to_group_set(pred, lexicon);
  const auto g = to_group_set(gt, lexicon);
  std::size_t hits = 0;
  for (const auto& group : p) {
    if (std::find(g.begin(), g.end(), group) != g.end()) ++hits;
  }
  SampleMetrics m;
  m.accuracy = static_cast<double>(hits) / static_cast<double>(p.size());
  m.recall = static_cast<double>(hits) / static_cast<double>(g.size());
  m.avg = combine_avg(m.accuracy, m.recall);
  return m;
}

struct SampleScore {
  std::string id;
  SampleMetrics metrics;

  bool operator==(const SampleScore&) const = default;
};

struct MetricReport {
  std::vector<SampleScore> per_sample;
  double macro_accuracy = 0.0;
  double macro_recall = 0.0;
  double macro_avg = 0.0;
  std::size_t n_samples = 0;

  bool operator==(const MetricReport&) const = default;
};

inline MetricReport aggregate(std::vector<SampleScore> per_sample) {
  if (per_sample.empty()) throw Error(ErrorCode::kEmptyInput, "cannot aggregate zero samples");
  MetricReport report;
  double acc = 0.0;
  double rec = 0.0;
  double avg = 0.0;
  for (const auto& s : per_sample) {
    acc += s.metrics.accuracy;
    rec += s.metrics.recall;
    avg += s.metrics.avg;
  }
  const auto n = static_cast<double>(per_sample.size());
  report.macro_accuracy = acc / n;
  report.macro_recall = rec / n;
  report.macro_avg = avg / n;
  report.n_samples = per_sample.size();
  report.per_sample = std::move(per_sample);
  return report;
}

inline Json to_json(const SampleMetrics& m) {
  Json j;
  j["accuracy"] = m.accuracy;
  j["recall"] = m.recall;
  j["avg"] = m.avg;
  return j;
}

inline Json to_json(const MetricReport& report) {
  Json j;
  j["n_samples"] = report.n_samples;
  j["macro"] = to_json(SampleMetrics{report.macro_accuracy, report.macro_recall, report.macro_avg});
  Json rows = Json::array();
  for (const auto& s : report.per_sample) {
    Json row;
    row["id"] = s.id;
    row["accuracy"] = s.metrics.accuracy;
    row["recall"] = s.metrics.recall;
    row["avg"] = s.metrics.avg;
    rows.push_back(std::move(row));
  }
  j["per_sample"] = std::move(rows);
  return j;
}

inline MetricReport metric_report_from_json(const Json& j) {
  try {
    MetricReport report;
    report.n_samples = j.at("n_samples").get<std::size_t>();
    report.macro_accuracy = j.at("macro").at("accuracy").get<double>();
    report.macro_recall = j.at("macro").at("recall").get<double>();
    report.macro_avg = j.at("macro").at("avg").get<double>();
    for (const auto& row : j.at("per_sample")) {
      report.per_sample.push_back(
          {row.at("id").get<std::string>(),
           {row.at("accuracy").get<double>(), row.at("recall").get<double>(),
            row.at("avg").get<double>()}});
    }
    return report;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed metric report: ") + e.what());
  }
}

// Fixed-width table, 4 decimals, one row per named report.
inline std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t width = 5;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "model" << "  " << std::right
      << std::setw(6) << "n" << "  " << std::setw(8) << "avg" << "  " << std::setw(8)
      << "accuracy" << "  " << std::setw(8) << "recall" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, r] : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right
        << std::setw(6) << r.n_samples << "  " << std::setw(8) << r.macro_avg << "  "
        << std::setw(8) << r.macro_accuracy << "  " << std::setw(8) << r.macro_recall << '\n';
  }
  return out.str();
}

}  // namespace ovemo
