#pragma once

#include <cmath>
#include <json.hpp>
#include <string>
#include <vector>

#include "occdist/inference.hpp"

namespace occdist {

// Chi-squared (1 dof) critical value at significance 0.05.
inline constexpr double kChiSquared1Critical05 = 3.8415;

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true class][predicted class]
  std::vector<double> per_class_accuracy;
  std::size_t n = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"accuracy", accuracy},
                          {"confusion", confusion},
                          {"per_class", per_class_accuracy},
                          {"n", n}};
  }
};

inline EvalReport evaluate_predictions(const std::vector<int>& preds,
                                       const std::vector<int>& labels,
                                       std::size_t class_count) {
  if (preds.size() != labels.size()) {
    throw ConsistencyError("evaluate: prediction/label count mismatch");
  }
  if (preds.empty()) throw DatasetError("evaluate: empty dataset");
  EvalReport report;
  report.n = preds.size();
  report.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    report.confusion[static_cast<std::size_t>(labels[i])]
                    [static_cast<std::size_t>(preds[i])]++;
    correct += preds[i] == labels[i];
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n);
  report.per_class_accuracy.assign(class_count, 0.0);
  for (std::size_t c = 0; c < class_count; ++c) {
    std::size_t row_total = 0;
    for (const std::size_t v : report.confusion[c]) row_total += v;
    if (row_total > 0) {
      report.per_class_accuracy[c] =
          static_cast<double>(report.confusion[c][c]) / static_cast<double>(row_total);
    }
  }
  return report;
}

inline EvalReport evaluate(const ParameterSet& params, const NetworkSpec& spec,
                           const OccludedDataset& ds) {
  if (ds.size() == 0) throw DatasetError("evaluate: empty dataset");
  return evaluate_predictions(predict(params, spec, ds), ds.labels, spec.class_count);
}

// Paired McNemar test over the disagreement counts of two classifiers.
struct McNemarResult {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  double statistic = 0.0;
  bool significant = false;
  bool defined = true;
  std::string reason;

  nlohmann::json to_json() const {
    nlohmann::json j{{"b", b}, {"c", c}, {"significant", significant}, {"defined", defined}};
    j["statistic"] = defined ? nlohmann::json(statistic) : nlohmann::json(nullptr);
    if (!reason.empty()) j["reason"] = reason;
    return j;
  }
};

// Continuity-corrected statistic (|b-c|-1)^2/(b+c), compared against the
// chi-squared critical value. b+c == 0 leaves the statistic undefined.
inline McNemarResult mcnemar_test(const std::vector<int>& preds_a,
                                  const std::vector<int>& preds_b,
                                  const std::vector<int>& labels, double level = 0.05) {
  if (preds_a.size() != preds_b.size() || preds_a.size() != labels.size()) {
    throw ConsistencyError("mcnemar: prediction/label length mismatch");
  }
  if (labels.empty()) throw DatasetError("mcnemar: empty prediction vectors");
  if (!(level > 0.0) || !(level < 1.0)) {
    throw ParameterError("mcnemar: significance level must be in (0,1)");
  }

  McNemarResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a_ok = preds_a[i] == labels[i];
    const bool b_ok = preds_b[i] == labels[i];
    if (a_ok && !b_ok) ++r.b;
    if (!a_ok && b_ok) ++r.c;
  }
  if (r.b + r.c == 0) {
    r.defined = false;
    r.significant = false;
    r.statistic = 0.0;
    r.reason = "no disagreements between the two classifiers (b+c = 0)";
    return r;
  }
  const double diff = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
  r.statistic = diff * diff / static_cast<double>(r.b + r.c);

  double critical = kChiSquared1Critical05;
  if (level != 0.05) {
    // chi2(1) quantile via the normal quantile: crit = z^2, z = Phi^-1(1-level/2).
    // Acklam's rational approximation is accurate to ~1e-9, ample for a
    // significance threshold.
    const double p = 1.0 - level / 2.0;
    const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                        1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    const double bb[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                         6.680131188771972e+01, -1.328068155288572e+01};
    const double cc[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                         -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                         3.754408661907416e+00};
    double z;
    if (p < 0.97575) {
      const double q = p - 0.5;
      const double t = q * q;
      z = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * q /
          (((((bb[0] * t + bb[1]) * t + bb[2]) * t + bb[3]) * t + bb[4]) * t + 1.0);
    } else {
      const double q = std::sqrt(-2.0 * std::log(1.0 - p));
      z = (((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q + cc[5]) /
          ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    critical = z * z;
  }
  r.significant = r.statistic > critical;
  return r;
}

}  // namespace occdist
