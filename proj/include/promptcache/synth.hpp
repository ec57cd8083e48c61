#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "promptcache/dataset.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/model.hpp"
#include "promptcache/rng.hpp"
#include "promptcache/train.hpp"

namespace promptcache {

enum class LabelMode {
    kExact,      // label = P*(pair)
    kBernoulli,  // label ~ Bernoulli(P*(pair))
};

std::string_view to_string(LabelMode mode);

/// Realizable world: base embeddings uniform on the unit sphere and a
/// ground-truth similarity model inside the parameter bounds.
struct SyntheticWorld {
    SimilarityModel truth;
    LabelMode labels;
    ParamBounds bounds;
    std::uint64_t seed;

    std::size_t dim() const noexcept { return truth.dim(); }
};

struct WorldOptions {
    double lambda = 0.05;
    double c = 2.0;
    LabelMode labels = LabelMode::kBernoulli;
    ParamBounds bounds{0.01, 10.0};
    /// Use the identity head as ground truth instead of rotation x emphasis.
    bool identity_truth = false;
};

/// Ground truth W* = Q diag(emphasis) for a seeded random rotation Q. The
/// world is redrawn until P* over random pairs reaches below 0.05 and above
/// 0.95; throws NumericalError if that fails repeatedly.
SyntheticWorld make_world(std::size_t dim, std::uint64_t seed, const WorldOptions& options = {});

/// Uniform draw from the unit sphere in R^dim.
Embedding sample_unit_vector(Rng& rng, std::size_t dim);

double draw_label(LabelMode mode, double true_prob, Rng& rng);

struct SyntheticSample {
    PairDataset dataset;
    EmbeddingStore embeddings;
};

/// n i.i.d. pairs of fresh unit vectors labeled per the world's label mode.
/// Prompt ids are "<prefix><i>a" / "<prefix><i>b".
SyntheticSample sample_dataset(const SyntheticWorld& world, std::size_t n, std::uint64_t seed,
                               const std::string& id_prefix = "s");

struct ConvergenceRow {
    std::size_t n;
    double mean_abs_error;
    LossType loss;
    std::uint64_t seed;

    friend bool operator==(const ConvergenceRow&, const ConvergenceRow&) = default;
};

struct ConvergenceOptions {
    std::size_t eval_pairs = 10000;
    std::uint64_t seed = 0;
};

/// For each N (strictly increasing) trains a fresh model in joint mode on the
/// first N pairs of one seeded sample and reports its mean absolute error
/// against the ground truth on a held-out set. The training sets are nested.
std::vector<ConvergenceRow> convergence_experiment(const SyntheticWorld& world,
                                                   std::span<const std::size_t> n_list,
                                                   const TrainConfig& cfg_template,
                                                   const ConvergenceOptions& options = {});

/// CSV with header "N,mean_abs_error,loss_type,seed".
void write_convergence_csv(std::span<const ConvergenceRow> rows, std::ostream& out);

struct PlantOptions {
    /// Squared weight of the label-bearing subspace in each base embedding.
    double signal_share = 0.05;
    /// Range of the (label-independent) base similarity.
    double sim_lo = 0.85;
    double sim_hi = 0.895;
    /// Hide the planted subspace behind a random rotation.
    bool rotate = true;
    std::size_t max_attempts = 16;
};

/// Pairs whose base similarity carries no label information while a planted
/// linear projection separates the labels.
struct HardWorld {
    std::vector<Prompt> prompts;
    EmbeddingStore embeddings;
    PairDataset dataset;
    ProjectionHead plant;
    double base_auc;
    double plant_auc;
};

/// n_prompts / 2 disjoint pairs with balanced 0/1 labels. Verified at
/// generation: base-similarity AUC in [0.45, 0.55] and planted-projection
/// AUC >= 0.99; retried with fresh draws, then NumericalError.
/// Throws UsageError if dim < 4 or n_prompts < 8.
HardWorld plant_hard_world(std::size_t dim, std::size_t n_prompts, std::uint64_t seed,
                           const PlantOptions& options = {});

}  // namespace promptcache
