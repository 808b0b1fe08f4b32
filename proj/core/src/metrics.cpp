#include "sir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sir/errors.hpp"

namespace sir {

std::string normalization_name(NormalizationKind kind) {
  return kind == NormalizationKind::InterPupil ? "inter-pupil" : "inter-ocular";
}

NormalizationKind normalization_from_name(const std::string& name) {
  if (name == "inter-pupil") return NormalizationKind::InterPupil;
  if (name == "inter-ocular") return NormalizationKind::InterOcular;
  throw DataError("unknown normalization '" + name + "'");
}

NormalizationSpec NormalizationSpec::defaults_for(int landmarkCount, NormalizationKind kind) {
  NormalizationSpec spec;
  spec.kind = kind;
  if (landmarkCount == 68) {
    if (kind == NormalizationKind::InterPupil) {
      for (int i = 36; i <= 41; ++i) spec.leftIndices.push_back(i);
      for (int i = 42; i <= 47; ++i) spec.rightIndices.push_back(i);
    } else {
      spec.leftIndices = {36};
      spec.rightIndices = {45};
    }
  } else {
    spec.leftIndices = {0};
    spec.rightIndices = {1};
  }
  return spec;
}

namespace {

Point2 group_mean(const LandmarkSet& lms, const std::vector<int>& indices) {
  if (indices.empty()) throw DataError("normalization spec has an empty index group");
  Point2 p;
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= lms.count()) {
      throw DataError("normalization index " + std::to_string(i) + " out of range for " +
                      std::to_string(lms.count()) + " landmarks");
    }
    p.x += lms.points[i].x;
    p.y += lms.points[i].y;
  }
  p.x /= static_cast<double>(indices.size());
  p.y /= static_cast<double>(indices.size());
  return p;
}

}  // namespace

double nme(const LandmarkSet& predicted, const LandmarkSet& groundTruth,
           const NormalizationSpec& norm) {
  if (predicted.count() != groundTruth.count()) {
    throw ShapeError("nme: prediction has " + std::to_string(predicted.count()) +
                     " landmarks, ground truth " + std::to_string(groundTruth.count()));
  }
  if (predicted.count() == 0) throw ShapeError("nme: empty landmark sets");

  double dist = distance(group_mean(groundTruth, norm.leftIndices),
                         group_mean(groundTruth, norm.rightIndices));
  if (dist <= 0.0) throw NumericError("nme: degenerate face, normalization distance is zero");

  double err = 0.0;
  for (std::size_t j = 0; j < predicted.count(); ++j) {
    err += distance(predicted.points[j], groundTruth.points[j]);
  }
  return err / static_cast<double>(predicted.count()) / dist;
}

CedCurve ced_auc_fr(const std::vector<double>& perImageNme, double threshold, int bins) {
  if (perImageNme.empty()) throw DataError("ced_auc_fr: empty error list");
  if (threshold <= 0.0) throw DataError("ced_auc_fr: threshold must be positive");
  if (bins < 2) throw DataError("ced_auc_fr: need at least 2 bins");

  std::vector<double> sorted = perImageNme;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  CedCurve curve;
  curve.samples.reserve(bins);
  for (int b = 0; b < bins; ++b) {
    double t = threshold * static_cast<double>(b) / static_cast<double>(bins - 1);
    auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    curve.samples.emplace_back(t, static_cast<double>(it - sorted.begin()) / n);
  }

  // Exact integral of the empirical CDF over [0, threshold]:
  // sum of (threshold - e_i) over errors within threshold, averaged.
  double integral = 0.0;
  std::size_t failures = 0;
  for (double e : sorted) {
    if (e <= threshold) {
      integral += threshold - std::max(e, 0.0);
    } else {
      ++failures;
    }
  }
  curve.auc = integral / n / threshold;
  curve.failureRate = static_cast<double>(failures) / n;
  return curve;
}

EvalReport evaluate(const std::vector<LandmarkSet>& predictions,
                    const std::vector<LandmarkSet>& groundTruth, const EvalConfig& config) {
  if (predictions.size() != groundTruth.size()) {
    throw DataError("evaluate: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(groundTruth.size()) + " ground-truth sets");
  }
  if (predictions.empty()) throw DataError("evaluate: nothing to evaluate");

  auto select = [](const LandmarkSet& lms, const std::vector<int>& subset) {
    if (subset.empty()) return lms;
    LandmarkSet out;
    out.points.reserve(subset.size());
    for (int i : subset) {
      if (i < 0 || static_cast<std::size_t>(i) >= lms.count()) {
        throw DataError("subset index " + std::to_string(i) + " out of range");
      }
      out.points.push_back(lms.points[i]);
    }
    return out;
  };

  EvalReport report;
  report.normalization = config.normalization.kind;
  report.threshold = config.threshold;
  report.subset = config.subset;
  report.perImageNme.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    // Normalization distance from the full markup; errors over the subset.
    double dist = distance(group_mean(groundTruth[i], config.normalization.leftIndices),
                           group_mean(groundTruth[i], config.normalization.rightIndices));
    if (dist <= 0.0) {
      throw NumericError("evaluate: degenerate face at index " + std::to_string(i));
    }
    LandmarkSet p = select(predictions[i], config.subset);
    LandmarkSet g = select(groundTruth[i], config.subset);
    if (p.count() != g.count() || p.count() == 0) {
      throw ShapeError("evaluate: bad subset selection at index " + std::to_string(i));
    }
    double err = 0.0;
    for (std::size_t j = 0; j < p.count(); ++j) err += distance(p.points[j], g.points[j]);
    report.perImageNme.push_back(err / static_cast<double>(p.count()) / dist);
  }

  CedCurve curve = ced_auc_fr(report.perImageNme, config.threshold, config.bins);
  report.cedSamples = std::move(curve.samples);
  report.auc = curve.auc;
  report.failureRate = curve.failureRate;
  report.meanNme = std::accumulate(report.perImageNme.begin(), report.perImageNme.end(), 0.0) /
                   static_cast<double>(report.perImageNme.size());
  return report;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["normalization"] = normalization_name(report.normalization);
  doc["threshold"] = report.threshold;
  doc["meanNme"] = report.meanNme;
  doc["auc"] = report.auc;
  doc["failureRate"] = report.failureRate;
  doc["subset"] = report.subset;
  doc["perImageNme"] = report.perImageNme;
  doc["cedSamples"] = nlohmann::json::array();
  for (const auto& [t, f] : report.cedSamples) {
    doc["cedSamples"].push_back({{"threshold", t}, {"fraction", f}});
  }
  return doc.dump(2);
}

EvalReport eval_report_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad eval report JSON: ") + e.what());
  }
  EvalReport report;
  report.normalization = normalization_from_name(doc.at("normalization").get<std::string>());
  report.threshold = doc.at("threshold").get<double>();
  report.meanNme = doc.at("meanNme").get<double>();
  report.auc = doc.at("auc").get<double>();
  report.failureRate = doc.at("failureRate").get<double>();
  report.subset = doc.value("subset", std::vector<int>{});
  report.perImageNme = doc.at("perImageNme").get<std::vector<double>>();
  for (const auto& s : doc.at("cedSamples")) {
    report.cedSamples.emplace_back(s.at("threshold").get<double>(),
                                   s.at("fraction").get<double>());
  }
  return report;
}

std::string ced_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "threshold,fraction\n";
  for (const auto& [t, f] : report.cedSamples) os << t << "," << f << "\n";
  return os.str();
}

}  // namespace sir
