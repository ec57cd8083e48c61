#include "promptcache/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "promptcache/errors.hpp"

namespace promptcache {

double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double l2_norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)), norm_(0.0) {
    if (values_.empty()) throw DataError("embedding must have positive dimension");
    for (double v : values_) {
        if (!std::isfinite(v)) throw DataError("embedding contains a non-finite entry");
    }
    norm_ = l2_norm(values_);
    if (!(norm_ > 0.0)) throw DataError("embedding has zero norm");
}

void Prompt::validate() const {
    if (id.empty()) throw DataError("prompt id must be non-empty");
    if (text.empty()) throw DataError("prompt '" + id + "' has empty text");
}

double cosine_similarity(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DataError("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
    }
    const double nx = l2_norm(x);
    const double ny = l2_norm(y);
    if (!(nx > 0.0) || !(ny > 0.0)) throw DataError("cosine similarity of a zero-norm vector");
    return std::clamp(dot(x, y) / (nx * ny), -1.0, 1.0);
}

double cosine_similarity(const Embedding& x, const Embedding& y) {
    if (x.dim() != y.dim()) {
        throw DataError("dimension mismatch: " + std::to_string(x.dim()) + " vs " +
                        std::to_string(y.dim()));
    }
    return std::clamp(dot(x.values(), y.values()) / (x.norm() * y.norm()), -1.0, 1.0);
}

double sigmoid(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("sigmoid of a non-finite value");
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("log_sigmoid of a non-finite value");
    // -softplus(-x)
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double clip(double x, double a, double b) {
    if (a > b) throw std::invalid_argument("clip: lower bound exceeds upper bound");
    return std::max(a, std::min(x, b));
}

}  // namespace promptcache
