#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

#include "promptcache/core.hpp"

namespace promptcache {

/// Temperature and offset of the induced probability sigma(sim / lambda - c).
struct CalibrationParams {
    double lambda = 0.01;
    double c = 88.0;

    /// Throws UsageError unless lambda is finite and positive and c is finite.
    void validate() const;

    friend bool operator==(const CalibrationParams&, const CalibrationParams&) = default;
};

/// Admissible region lambda >= min_lambda, |c| <= max_abs_c.
struct ParamBounds {
    double min_lambda = 1e-3;
    double max_abs_c = 100.0;

    void validate() const;
    bool contains(const CalibrationParams& p) const;
    /// Projects onto the admissible region.
    CalibrationParams clamp(const CalibrationParams& p) const;
};

/// Trainable d x d linear map over frozen base embeddings, row-major.
class ProjectionHead {
public:
    static ProjectionHead identity(std::size_t dim);

    /// Throws DataError if weights.size() != dim*dim or any entry is non-finite.
    ProjectionHead(std::size_t dim, std::vector<double> weights);

    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<double> mutable_weights() noexcept { return weights_; }
    double at(std::size_t row, std::size_t col) const { return weights_[row * dim_ + col]; }

    /// W x, written into out (size dim).
    void apply(std::span<const double> x, std::span<double> out) const;
    std::vector<double> apply(std::span<const double> x) const;

    friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;

private:
    std::size_t dim_;
    std::vector<double> weights_;
};

/// Induced hit probability P(q1 = q2) = sigma(sim(W e1, W e2) / lambda - c).
class SimilarityModel {
public:
    /// Identity head of the given dimension.
    SimilarityModel(std::size_t dim, CalibrationParams calib);
    SimilarityModel(ProjectionHead head, CalibrationParams calib);

    const ProjectionHead& head() const noexcept { return head_; }
    ProjectionHead& mutable_head() noexcept { return head_; }
    const CalibrationParams& calibration() const noexcept { return calib_; }
    void set_calibration(CalibrationParams calib);
    std::size_t dim() const noexcept { return head_.dim(); }

    /// W e. Throws DataError on dimension mismatch and NumericalError if the
    /// projected norm falls below 1e-12.
    Embedding project(const Embedding& e) const;

    /// Cosine similarity of the projected pair.
    double similarity(const Embedding& e1, const Embedding& e2) const;
    double logit(const Embedding& e1, const Embedding& e2) const;
    double predict_prob(const Embedding& e1, const Embedding& e2) const;

    friend bool operator==(const SimilarityModel&, const SimilarityModel&) = default;

private:
    ProjectionHead head_;
    CalibrationParams calib_;
};

inline constexpr double kDegenerateProjectionNorm = 1e-12;

// Checkpoint file ("PCSIM1"): magic line, then
// "d=<int> lambda=<hex bits> c=<hex bits>" and d*d little-endian binary64
// weights, row-major. Bit patterns make the round trip exact.
inline constexpr char kCheckpointMagic[] = "PCSIM1\n";

void save_checkpoint(const SimilarityModel& model, std::ostream& out);
void save_checkpoint(const SimilarityModel& model, const std::filesystem::path& path);
SimilarityModel load_checkpoint(std::istream& in);
SimilarityModel load_checkpoint(const std::filesystem::path& path);

}  // namespace promptcache
