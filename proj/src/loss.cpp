#include "promptcache/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "promptcache/errors.hpp"

namespace promptcache {

PairBatch::PairBatch(std::vector<PairItem> items) : items_(std::move(items)) {
    if (items_.empty()) throw DataError("pair batch must be non-empty");
    const std::size_t d = items_.front().first.get().dim();
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& it = items_[i];
        if (!std::isfinite(it.label) || it.label < 0.0 || it.label > 1.0) {
            throw DataError("pair " + std::to_string(i) + " has label outside [0, 1]");
        }
        if (it.first.get().dim() != d || it.second.get().dim() != d) {
            throw DataError("pair " + std::to_string(i) + " has inconsistent dimension");
        }
    }
}

GradientSet GradientSet::zeros(std::size_t dim) {
    return GradientSet{dim, std::vector<double>(dim * dim, 0.0), 0.0, 0.0};
}

bool GradientSet::all_finite() const {
    for (double g : d_weights) {
        if (!std::isfinite(g)) return false;
    }
    return std::isfinite(d_lambda) && std::isfinite(d_c);
}

namespace {

// Per-pair forward quantities shared by the losses and their gradients.
struct Forward {
    std::vector<double> u, v;  // W e1, W e2
    double nu = 0, nv = 0;
    double sim = 0;
    double z = 0;
};

void forward(const SimilarityModel& model, const PairItem& item, Forward& f) {
    const auto& head = model.head();
    if (item.first.get().dim() != head.dim()) {
        throw DataError("model dimension " + std::to_string(head.dim()) +
                        " does not match embedding dimension " +
                        std::to_string(item.first.get().dim()));
    }
    f.u.resize(head.dim());
    f.v.resize(head.dim());
    head.apply(item.first.get().values(), f.u);
    head.apply(item.second.get().values(), f.v);
    f.nu = l2_norm(f.u);
    f.nv = l2_norm(f.v);
    if (!(f.nu >= kDegenerateProjectionNorm) || !(f.nv >= kDegenerateProjectionNorm)) {
        throw NumericalError("degenerate projection: projected embedding has norm below 1e-12");
    }
    f.sim = std::clamp(dot(f.u, f.v) / (f.nu * f.nv), -1.0, 1.0);
    const auto& calib = model.calibration();
    f.z = f.sim / calib.lambda - calib.c;
}

// Loss value and dLoss/dz for one pair.
struct Term {
    double value;
    double dz;
};

Term bce_term(double z, double p) {
    const double pos = sigmoid(z);
    const double neg = sigmoid(-z);
    static const double log_guard = std::log(kProbabilityGuard);
    double value = 0.0;
    double dz = 0.0;
    if (p > 0.0) {
        if (pos >= kProbabilityGuard) {
            value -= p * log_sigmoid(z);
            dz -= p * neg;
        } else {
            value -= p * log_guard;
        }
    }
    if (p < 1.0) {
        if (neg >= kProbabilityGuard) {
            value -= (1.0 - p) * log_sigmoid(-z);
            dz += (1.0 - p) * pos;
        } else {
            value -= (1.0 - p) * log_guard;
        }
    }
    return {value, dz};
}

Term sld_term(double z, double p) {
    if (!(p > 0.0)) {
        throw DataError("SLD loss requires labels > 0; clip labels to [1e-10, 1] first");
    }
    const double r = std::log(p) - log_sigmoid(z);
    return {r * r, -2.0 * r * sigmoid(-z)};
}

template <typename TermFn>
double mean_loss(const SimilarityModel& model, const PairBatch& batch, TermFn term) {
    Forward f;
    double total = 0.0;
    for (const auto& item : batch.items()) {
        forward(model, item, f);
        total += term(f.z, item.label).value;
    }
    return total / static_cast<double>(batch.size());
}

template <typename TermFn>
GradientSet mean_grad(const SimilarityModel& model, const PairBatch& batch, TermFn term) {
    const std::size_t d = model.dim();
    const double lambda = model.calibration().lambda;
    GradientSet grad = GradientSet::zeros(d);
    Forward f;
    std::vector<double> ds_du(d), ds_dv(d);
    for (const auto& item : batch.items()) {
        forward(model, item, f);
        const double g = term(f.z, item.label).dz;
        const double inv_uv = 1.0 / (f.nu * f.nv);
        const double s_u = f.sim / (f.nu * f.nu);
        const double s_v = f.sim / (f.nv * f.nv);
        for (std::size_t i = 0; i < d; ++i) {
            ds_du[i] = f.v[i] * inv_uv - s_u * f.u[i];
            ds_dv[i] = f.u[i] * inv_uv - s_v * f.v[i];
        }
        // u = W e1 and v = W e2, so dL/dW = (dL/du) e1^T + (dL/dv) e2^T.
        const double scale = g / lambda;
        const auto e1 = item.first.get().values();
        const auto e2 = item.second.get().values();
        for (std::size_t r = 0; r < d; ++r) {
            const double a = scale * ds_du[r];
            const double b = scale * ds_dv[r];
            double* row = grad.d_weights.data() + r * d;
            for (std::size_t col = 0; col < d; ++col) row[col] += a * e1[col] + b * e2[col];
        }
        grad.d_lambda += -g * f.sim / (lambda * lambda);
        grad.d_c += -g;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (double& w : grad.d_weights) w *= inv_n;
    grad.d_lambda *= inv_n;
    grad.d_c *= inv_n;
    return grad;
}

}  // namespace

double bce_loss(const SimilarityModel& model, const PairBatch& batch) {
    return mean_loss(model, batch, bce_term);
}

double sld_loss(const SimilarityModel& model, const PairBatch& batch) {
    return mean_loss(model, batch, sld_term);
}

GradientSet bce_grad(const SimilarityModel& model, const PairBatch& batch) {
    return mean_grad(model, batch, bce_term);
}

GradientSet sld_grad(const SimilarityModel& model, const PairBatch& batch) {
    return mean_grad(model, batch, sld_term);
}

double expected_bce_loss(const SimilarityModel& model, std::span<const WeightedPair> dist) {
    if (dist.empty()) throw DataError("pair distribution must be non-empty");
    Forward f;
    double total = 0.0;
    for (const auto& wp : dist) {
        if (!(wp.mass >= 0.0) || !(wp.true_prob >= 0.0 && wp.true_prob <= 1.0)) {
            throw DataError("pair distribution entry has invalid mass or probability");
        }
        forward(model, PairItem{wp.first, wp.second, wp.true_prob}, f);
        total += wp.mass * bce_term(f.z, wp.true_prob).value;
    }
    return total;
}

}  // namespace promptcache
