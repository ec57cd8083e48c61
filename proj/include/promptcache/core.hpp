#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace promptcache {

/// Fixed-dimension, finite, nonzero real vector representing one prompt.
///
/// The Euclidean norm is computed once at construction; the vector itself is
/// never normalized so callers get back exactly what they stored.
class Embedding {
public:
    /// Throws DataError on an empty vector, a non-finite entry or zero norm.
    explicit Embedding(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double norm() const noexcept { return norm_; }

    friend bool operator==(const Embedding& a, const Embedding& b) {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
    double norm_;
};

struct Prompt {
    std::string id;
    std::string text;

    /// Throws DataError if id or text is empty.
    void validate() const;

    friend bool operator==(const Prompt&, const Prompt&) = default;
};

double dot(std::span<const double> x, std::span<const double> y);
double l2_norm(std::span<const double> x);

/// <x,y>/(|x||y|), clamped to [-1, 1].
double cosine_similarity(const Embedding& x, const Embedding& y);

/// Raw-span variant; throws DataError on dimension mismatch or zero norm.
double cosine_similarity(std::span<const double> x, std::span<const double> y);

/// Logistic function. Throws std::invalid_argument on non-finite input.
double sigmoid(double x);

/// log(sigmoid(x)) without overflow or cancellation.
double log_sigmoid(double x);

/// max(a, min(x, b)). Throws std::invalid_argument if a > b.
double clip(double x, double a, double b);

}  // namespace promptcache
