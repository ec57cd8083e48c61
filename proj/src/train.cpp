#include "promptcache/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "promptcache/errors.hpp"
#include "promptcache/metrics.hpp"
#include "promptcache/rng.hpp"

namespace promptcache {

LossType parse_loss_type(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "bce") return LossType::kBce;
    if (lower == "sld") return LossType::kSld;
    throw NotImplementedError("loss type '" + std::string(name) +
                              "' is not implemented (expected bce or sld)");
}

std::string_view to_string(LossType loss) { return loss == LossType::kBce ? "bce" : "sld"; }

TrainConfig TrainConfig::defaults_for(LossType loss) {
    TrainConfig cfg;
    cfg.loss = loss;
    cfg.calibration = {0.01, loss == LossType::kBce ? 88.0 : 90.0};
    return cfg;
}

void TrainConfig::validate() const {
    // A zero learning rate is accepted: it evaluates a fixed model through
    // the full training loop.
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
        throw UsageError("learning rate must be finite and non-negative");
    }
    if (epochs < 1) throw UsageError("epochs must be at least 1");
    if (batch_size < 1) throw UsageError("batch size must be at least 1");
    if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
        throw UsageError("weight decay must be non-negative");
    }
    calibration.validate();
    if (bounds) {
        bounds->validate();
        if (!bounds->contains(calibration)) {
            throw UsageError("initial lambda/c lie outside the configured bounds");
        }
    }
}

double batch_loss(LossType loss, const SimilarityModel& model, const PairBatch& batch) {
    return loss == LossType::kBce ? bce_loss(model, batch) : sld_loss(model, batch);
}

GradientSet batch_grad(LossType loss, const SimilarityModel& model, const PairBatch& batch) {
    return loss == LossType::kBce ? bce_grad(model, batch) : sld_grad(model, batch);
}

std::vector<double> score_pairs(const SimilarityModel& model, std::span<const PairItem> items) {
    std::vector<double> scores;
    scores.reserve(items.size());
    for (const auto& it : items) scores.push_back(model.logit(it.first.get(), it.second.get()));
    return scores;
}

double evaluate_auc(const SimilarityModel& model, const EmbeddingStore& embeddings,
                    const PairDataset& dataset) {
    const auto items = dataset.embed(embeddings);
    bool has_pos = false, has_neg = false;
    std::vector<double> labels;
    labels.reserve(items.size());
    for (const auto& it : items) {
        labels.push_back(it.label);
        (it.label >= 0.5 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) return std::numeric_limits<double>::quiet_NaN();
    return roc_auc_thresholded(score_pairs(model, items), labels).auc;
}

TrainReport train(const EmbeddingStore& embeddings, const PairDataset& train_set,
                  const PairDataset& val_set, const TrainConfig& cfg,
                  const StepObserver& observer) {
    cfg.validate();
    if (train_set.empty()) throw DataError("training set is empty");

    PairDataset working = train_set;
    if (cfg.loss == LossType::kSld) working.clip_labels(kSldLabelFloor, 1.0);
    const auto items = working.embed(embeddings);
    // Resolve validation ids up front so a missing embedding fails early.
    (void)val_set.embed(embeddings);
    const std::size_t d = items.front().first.get().dim();

    SimilarityModel model(d, cfg.calibration);
    TrainReport report{{}, {}, evaluate_auc(model, embeddings, val_set), model};

    const std::size_t n_weights = d * d;
    const std::size_t n_params = n_weights + (cfg.joint ? 2 : 0);
    std::vector<double> params(n_params), grads(n_params);
    std::vector<std::uint8_t> decay_mask(n_params, 0);
    std::fill(decay_mask.begin(), decay_mask.begin() + static_cast<std::ptrdiff_t>(n_weights), 1);
    AdamWState state = AdamWState::zeros(n_params);

    const PairBatch full_batch(items);
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, epoch));
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<PairItem> mb;
            mb.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) mb.push_back(items[order[i]]);
            const PairBatch batch(std::move(mb));

            const GradientSet g = batch_grad(cfg.loss, model, batch);
            if (!g.all_finite()) {
                throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch + 1) +
                                     ", step " + std::to_string(step + 1));
            }
            const auto w = model.head().weights();
            std::copy(w.begin(), w.end(), params.begin());
            std::copy(g.d_weights.begin(), g.d_weights.end(), grads.begin());
            CalibrationParams calib = model.calibration();
            if (cfg.joint) {
                params[n_weights] = std::log(calib.lambda);
                params[n_weights + 1] = calib.c;
                // Chain rule through lambda = exp(log_lambda).
                grads[n_weights] = g.d_lambda * calib.lambda;
                grads[n_weights + 1] = g.d_c;
            }

            adamw_step(state, params, grads, cfg.learning_rate, cfg.weight_decay, decay_mask,
                       cfg.adamw);

            for (double p : params) {
                if (!std::isfinite(p)) {
                    throw NumericalError("non-finite parameter after step " +
                                         std::to_string(step + 1));
                }
            }
            auto head = model.mutable_head().mutable_weights();
            std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n_weights),
                      head.begin());
            if (cfg.joint) {
                calib = {std::exp(params[n_weights]), params[n_weights + 1]};
                if (cfg.bounds) calib = cfg.bounds->clamp(calib);
                // exp() of a runaway log-lambda under- or overflows.
                if (!(calib.lambda > 0.0 && std::isfinite(calib.lambda))) {
                    throw NumericalError("lambda left the representable range after step " +
                                         std::to_string(step + 1));
                }
                model.set_calibration(calib);
            }
            ++step;
            if (observer) observer(step, model);
        }

        const double loss = batch_loss(cfg.loss, model, full_batch);
        if (!std::isfinite(loss)) {
            throw NumericalError("non-finite training loss after epoch " +
                                 std::to_string(epoch + 1));
        }
        report.train_loss.push_back(loss);
        report.val_auc.push_back(evaluate_auc(model, embeddings, val_set));
    }
    report.model = std::move(model);
    return report;
}

}  // namespace promptcache
