#pragma once

#include <functional>
#include <span>
#include <vector>

#include "promptcache/core.hpp"
#include "promptcache/model.hpp"

namespace promptcache {

/// One labeled pair in embedded form. The embeddings are borrowed.
struct PairItem {
    std::reference_wrapper<const Embedding> first;
    std::reference_wrapper<const Embedding> second;
    double label;
};

/// Non-empty batch of embedded pairs with labels in [0, 1] and one shared
/// dimension. Validated on construction (DataError).
class PairBatch {
public:
    explicit PairBatch(std::vector<PairItem> items);

    std::span<const PairItem> items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t dim() const noexcept { return items_.front().first.get().dim(); }

private:
    std::vector<PairItem> items_;
};

/// Gradient of a batch-mean loss with respect to (W, lambda, c).
struct GradientSet {
    std::size_t dim = 0;
    std::vector<double> d_weights;  // row-major, dim x dim
    double d_lambda = 0.0;
    double d_c = 0.0;

    static GradientSet zeros(std::size_t dim);
    bool all_finite() const;
};

/// Lower guard applied to P and 1 - P before taking logs in the BCE loss.
inline constexpr double kProbabilityGuard = 1e-15;

/// Mean binary cross-entropy -[p log P + (1-p) log(1-P)].
double bce_loss(const SimilarityModel& model, const PairBatch& batch);

/// Mean squared log difference (log p - log P)^2. Labels must already be
/// clipped away from zero; a label <= 0 throws DataError.
double sld_loss(const SimilarityModel& model, const PairBatch& batch);

GradientSet bce_grad(const SimilarityModel& model, const PairBatch& batch);
GradientSet sld_grad(const SimilarityModel& model, const PairBatch& batch);

/// Pair drawn from a finite distribution: its probability mass and the true
/// probability that both prompts share a response.
struct WeightedPair {
    std::reference_wrapper<const Embedding> first;
    std::reference_wrapper<const Embedding> second;
    double mass;
    double true_prob;
};

/// Population BCE loss -E_mu[P* log P + (1-P*) log(1-P)] over a finite pair
/// distribution whose masses sum to one.
double expected_bce_loss(const SimilarityModel& model, std::span<const WeightedPair> dist);

}  // namespace promptcache
