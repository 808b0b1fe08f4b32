#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sir/geometry.hpp"

namespace sir {

enum class NormalizationKind { InterPupil, InterOcular };

std::string normalization_name(NormalizationKind kind);
NormalizationKind normalization_from_name(const std::string& name);

// Defines the two reference points of the normalization distance as landmark
// index groups: each point is the mean of its group (a single index for
// corner-based normalization).
struct NormalizationSpec {
  NormalizationKind kind = NormalizationKind::InterPupil;
  std::vector<int> leftIndices;
  std::vector<int> rightIndices;

  // 68-point markup: eye centers as the mean of indices 36-41 / 42-47,
  // outer corners 36 / 45. Other landmark counts default to the first two
  // landmarks as reference points.
  static NormalizationSpec defaults_for(int landmarkCount,
                                        NormalizationKind kind = NormalizationKind::InterPupil);
};

// Mean point-to-point error divided by the normalization distance computed
// from ground truth. Throws NumericError when that distance is zero.
double nme(const LandmarkSet& predicted, const LandmarkSet& groundTruth,
           const NormalizationSpec& norm);

// Cumulative error distribution, area under it, and failure rate.
// cedSamples holds (errorThreshold, fraction <= errorThreshold) at `bins`
// uniform thresholds spanning [0, threshold]. The AUC is the exact integral
// of the empirical CDF over [0, threshold] divided by threshold (the
// bins-to-infinity limit of the trapezoidal sum over cedSamples), so a
// perfect detector scores 1. Failures are errors strictly above threshold.
struct CedCurve {
  std::vector<std::pair<double, double>> samples;
  double auc = 0.0;
  double failureRate = 0.0;
};
CedCurve ced_auc_fr(const std::vector<double>& perImageNme, double threshold = 0.08,
                    int bins = 1001);

struct EvalConfig {
  NormalizationSpec normalization;
  double threshold = 0.08;
  int bins = 1001;
  std::vector<int> subset;  // landmark indices to score; empty = all
};

struct EvalReport {
  std::vector<double> perImageNme;
  NormalizationKind normalization = NormalizationKind::InterPupil;
  std::vector<std::pair<double, double>> cedSamples;
  double auc = 0.0;
  double failureRate = 0.0;
  double threshold = 0.08;
  double meanNme = 0.0;
  std::vector<int> subset;
};

// Full evaluation over aligned prediction/ground-truth pairs. The
// normalization distance always comes from the full ground-truth markup;
// `subset` restricts which landmarks contribute point errors.
EvalReport evaluate(const std::vector<LandmarkSet>& predictions,
                    const std::vector<LandmarkSet>& groundTruth, const EvalConfig& config);

std::string eval_report_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
std::string ced_csv(const EvalReport& report);

}  // namespace sir
