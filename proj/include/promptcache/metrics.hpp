#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "promptcache/loss.hpp"
#include "promptcache/model.hpp"

namespace promptcache {

struct RocPoint {
    double fpr;
    double tpr;
};

/// ROC curve from (0,0) to (1,1), one point per distinct score, with the
/// trapezoid area under it. Tied scores earn half credit.
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// labels must be 0/1 with at least one of each; scores must be finite.
/// Throws DataError otherwise.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Convenience wrapper: labels >= 0.5 count as positive.
RocCurve roc_auc_thresholded(std::span<const double> scores, std::span<const double> labels);

void write_roc_csv(const RocCurve& roc, std::ostream& out);
void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path);

/// AUC rendered with four decimals, e.g. "0.8100".
std::string format_auc(double auc);

using ProbabilityFn = std::function<double(const Embedding&, const Embedding&)>;

/// Mean |P*(pair) - P_model(pair)| over the evaluation pairs (labels ignored).
/// Throws DataError on an empty set.
double mean_abs_error(const SimilarityModel& model, const ProbabilityFn& truth,
                      std::span<const PairItem> eval_pairs);
double mean_abs_error(const SimilarityModel& model, const SimilarityModel& truth,
                      std::span<const PairItem> eval_pairs);

}  // namespace promptcache
