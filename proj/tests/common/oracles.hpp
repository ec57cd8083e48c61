#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <algorithm>
#include <cmath>
#include <functional>

#include "promptcache/core.hpp"
#include "promptcache/loss.hpp"
#include "promptcache/model.hpp"
#include "promptcache/rng.hpp"

namespace promptcache::oracles {

inline Embedding random_embedding(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return Embedding(std::move(v));
}

// Mann-Whitney statistic by direct pair counting; ties count one half.
inline double brute_force_auc(std::span<const double> scores, std::span<const int> labels) {
    double wins = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) ++n_pos; else ++n_neg;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Central differences of `loss` with respect to every W entry, lambda and c,
// compared with `grad`. Components whose magnitude is at most `floor` in both
// estimates are skipped.
inline GradCheck finite_difference_check(
    const SimilarityModel& model, const PairBatch& batch,
    const std::function<double(const SimilarityModel&, const PairBatch&)>& loss,
    const GradientSet& grad, double step = 1e-5, double floor = 1e-8) {
    GradCheck out;
    auto compare = [&](double analytic, double numeric) {
        if (std::abs(analytic) <= floor && std::abs(numeric) <= floor) return;
        const double rel = std::abs(analytic - numeric) /
                           std::max(std::abs(analytic), std::abs(numeric));
        out.max_rel_error = std::max(out.max_rel_error, rel);
        ++out.checked;
    };
    const std::size_t d = model.dim();
    for (std::size_t i = 0; i < d * d; ++i) {
        SimilarityModel plus = model, minus = model;
        plus.mutable_head().mutable_weights()[i] += step;
        minus.mutable_head().mutable_weights()[i] -= step;
        compare(grad.d_weights[i], (loss(plus, batch) - loss(minus, batch)) / (2.0 * step));
    }
    const auto calib = model.calibration();
    {
        SimilarityModel plus = model, minus = model;
        plus.set_calibration({calib.lambda + step, calib.c});
        minus.set_calibration({calib.lambda - step, calib.c});
        compare(grad.d_lambda, (loss(plus, batch) - loss(minus, batch)) / (2.0 * step));
    }
    {
        SimilarityModel plus = model, minus = model;
        plus.set_calibration({calib.lambda, calib.c + step});
        minus.set_calibration({calib.lambda, calib.c - step});
        compare(grad.d_c, (loss(plus, batch) - loss(minus, batch)) / (2.0 * step));
    }
    return out;
}

// Random model (W near identity, lambda in [0.2, 2], c in [-2, 2]) and a
// batch of `n` pairs with labels in (0, 1].
struct RandomProblem {
    SimilarityModel model;
    std::vector<Embedding> embeddings;
    std::vector<double> labels;

    PairBatch batch() const {
        std::vector<PairItem> items;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            items.push_back({std::cref(embeddings[2 * i]), std::cref(embeddings[2 * i + 1]), labels[i]});
        }
        return PairBatch(std::move(items));
    }
};

inline RandomProblem random_problem(Rng& rng, std::size_t d, std::size_t n) {
    std::vector<double> w(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) w[i * d + j] = (i == j ? 1.0 : 0.0) + 0.3 * rng.normal();
    }
    RandomProblem p{SimilarityModel(ProjectionHead(d, w),
                                    {rng.uniform(0.2, 2.0), rng.uniform(-2.0, 2.0)}),
                    {}, {}};
    for (std::size_t i = 0; i < 2 * n; ++i) p.embeddings.push_back(random_embedding(rng, d));
    for (std::size_t i = 0; i < n; ++i) p.labels.push_back(rng.uniform(0.05, 1.0));
    return p;
}

}  // namespace promptcache::oracles
