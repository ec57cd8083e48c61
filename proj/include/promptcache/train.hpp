#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptcache/dataset.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/loss.hpp"
#include "promptcache/model.hpp"
#include "promptcache/optim.hpp"

namespace promptcache {

enum class LossType { kBce, kSld };

/// "bce" or "sld" (case-insensitive); anything else throws NotImplementedError.
LossType parse_loss_type(std::string_view name);
std::string_view to_string(LossType loss);

/// Labels are clipped into this range before SLD training.
inline constexpr double kSldLabelFloor = 1e-10;

struct TrainConfig {
    LossType loss = LossType::kBce;
    double learning_rate = 1e-5;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    /// Fixed calibration, or the starting point in joint mode.
    CalibrationParams calibration{0.01, 88.0};
    /// Also optimize lambda (in log space) and c.
    bool joint = false;
    std::uint64_t seed = 0;
    /// Decoupled decay, applied to the projection weights only.
    double weight_decay = 0.01;
    std::optional<ParamBounds> bounds;
    AdamWOptions adamw;

    /// Defaults for the given loss: c = 88 for BCE, 90 for SLD.
    static TrainConfig defaults_for(LossType loss);

    /// Throws UsageError on invalid settings.
    void validate() const;
};

struct TrainReport {
    /// Full training-set loss after each epoch.
    std::vector<double> train_loss;
    /// Validation AUC after each epoch; NaN when the validation set is empty
    /// or single-class.
    std::vector<double> val_auc;
    /// Validation AUC of the untrained (identity-head) model.
    double initial_val_auc = 0.0;
    SimilarityModel model;
};

/// Called after every optimizer step with the 1-based step count.
using StepObserver = std::function<void(std::size_t step, const SimilarityModel& model)>;

/// Minibatch AdamW training of the projection head (and, in joint mode, of
/// lambda and c). Every shuffle is derived from cfg.seed, so identical inputs
/// give bit-identical reports. The last partial minibatch of an epoch is kept.
TrainReport train(const EmbeddingStore& embeddings, const PairDataset& train_set,
                  const PairDataset& val_set, const TrainConfig& cfg,
                  const StepObserver& observer = {});

double batch_loss(LossType loss, const SimilarityModel& model, const PairBatch& batch);
GradientSet batch_grad(LossType loss, const SimilarityModel& model, const PairBatch& batch);

/// AUC of the model's logits against labels thresholded at 0.5; NaN if the
/// dataset is empty or single-class.
double evaluate_auc(const SimilarityModel& model, const EmbeddingStore& embeddings,
                    const PairDataset& dataset);

/// Model logits for each pair (monotone in projected similarity).
std::vector<double> score_pairs(const SimilarityModel& model, std::span<const PairItem> items);

}  // namespace promptcache
