#include "promptcache/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "promptcache/errors.hpp"

namespace promptcache {

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
    double n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError("roc_auc: non-finite score");
        if (labels[i] == 1) {
            ++n_pos;
        } else if (labels[i] == 0) {
            ++n_neg;
        } else {
            throw DataError("roc_auc: labels must be 0 or 1");
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_auc: need at least one positive and one negative label");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    // Area is accumulated in count units (exact for realistic sizes) and
    // normalized once at the end.
    double tp = 0, fp = 0, area = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        double group_tp = 0, group_fp = 0;
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            if (labels[order[i]] == 1) {
                ++group_tp;
            } else {
                ++group_fp;
            }
        }
        area += group_fp * (2.0 * tp + group_tp) / 2.0;
        tp += group_tp;
        fp += group_fp;
        roc.points.push_back({fp / n_neg, tp / n_pos});
    }
    roc.auc = area / (n_pos * n_neg);
    return roc;
}

RocCurve roc_auc_thresholded(std::span<const double> scores, std::span<const double> labels) {
    std::vector<int> binary(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] >= 0.5 ? 1 : 0;
    return roc_auc(scores, binary);
}

void write_roc_csv(const RocCurve& roc, std::ostream& out) {
    out << "fpr,tpr\n";
    char buf[64];
    for (const auto& p : roc.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.fpr, p.tpr);
        out << buf;
    }
}

void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    write_roc_csv(roc, out);
}

std::string format_auc(double auc) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", auc);
    return buf;
}

double mean_abs_error(const SimilarityModel& model, const ProbabilityFn& truth,
                      std::span<const PairItem> eval_pairs) {
    if (eval_pairs.empty()) throw DataError("mean_abs_error: empty evaluation set");
    double total = 0.0;
    for (const auto& item : eval_pairs) {
        const double p_true = truth(item.first.get(), item.second.get());
        const double p_model = model.predict_prob(item.first.get(), item.second.get());
        total += std::abs(p_true - p_model);
    }
    return total / static_cast<double>(eval_pairs.size());
}

double mean_abs_error(const SimilarityModel& model, const SimilarityModel& truth,
                      std::span<const PairItem> eval_pairs) {
    return mean_abs_error(
        model,
        [&truth](const Embedding& a, const Embedding& b) { return truth.predict_prob(a, b); },
        eval_pairs);
}

}  // namespace promptcache
