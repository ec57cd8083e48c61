#include "promptcache/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "promptcache/errors.hpp"
#include "promptcache/metrics.hpp"

namespace promptcache {

std::string_view to_string(LabelMode mode) {
    return mode == LabelMode::kExact ? "exact" : "bernoulli";
}

Embedding sample_unit_vector(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        for (auto& x : v) x = rng.normal();
        norm = l2_norm(v);
    } while (norm < 1e-8);
    for (auto& x : v) x /= norm;
    return Embedding(std::move(v));
}

double draw_label(LabelMode mode, double true_prob, Rng& rng) {
    if (mode == LabelMode::kExact) return true_prob;
    return rng.bernoulli(true_prob) ? 1.0 : 0.0;
}

namespace {

// Rows of a seeded random orthogonal matrix (Gram-Schmidt on Gaussian rows).
std::vector<double> random_rotation(Rng& rng, std::size_t d) {
    std::vector<double> q(d * d);
    for (std::size_t r = 0; r < d; ++r) {
        std::span<double> row(q.data() + r * d, d);
        for (;;) {
            for (auto& x : row) x = rng.normal();
            for (std::size_t p = 0; p < r; ++p) {
                std::span<const double> prev(q.data() + p * d, d);
                const double proj = dot(row, prev);
                for (std::size_t i = 0; i < d; ++i) row[i] -= proj * prev[i];
            }
            const double n = l2_norm(row);
            if (n > 1e-6) {
                for (auto& x : row) x /= n;
                break;
            }
        }
    }
    return q;
}

// a (d x d) * b (d x d), both row-major.
std::vector<double> matmul(std::span<const double> a, std::span<const double> b, std::size_t d) {
    std::vector<double> out(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            const double aik = a[i * d + k];
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] += aik * b[k * d + j];
        }
    }
    return out;
}

std::vector<double> transpose(std::span<const double> a, std::size_t d) {
    std::vector<double> out(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) out[j * d + i] = a[i * d + j];
    }
    return out;
}

std::vector<double> rotate(std::span<const double> rot, std::span<const double> x) {
    const std::size_t d = x.size();
    std::vector<double> out(d);
    for (std::size_t r = 0; r < d; ++r) out[r] = dot(rot.subspan(r * d, d), x);
    return out;
}

}  // namespace

SyntheticWorld make_world(std::size_t dim, std::uint64_t seed, const WorldOptions& options) {
    if (dim == 0) throw UsageError("world dimension must be positive");
    options.bounds.validate();
    const CalibrationParams calib{options.lambda, options.c};
    calib.validate();
    if (!options.bounds.contains(calib)) {
        throw UsageError("ground-truth lambda/c violate the world's bounds");
    }
    constexpr std::size_t kAttempts = 16;
    constexpr std::size_t kProbePairs = 2000;
    for (std::size_t attempt = 0; attempt < kAttempts; ++attempt) {
        Rng rng(derive_seed(seed, attempt));
        ProjectionHead head = ProjectionHead::identity(dim);
        if (!options.identity_truth) {
            auto q = random_rotation(rng, dim);
            // Emphasis decays geometrically from 2 to 1/2 across the diagonal.
            std::vector<double> diag(dim * dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                const double frac = dim > 1 ? static_cast<double>(i) / static_cast<double>(dim - 1) : 0.0;
                diag[i * dim + i] = std::pow(2.0, 1.0 - 2.0 * frac);
            }
            head = ProjectionHead(dim, matmul(q, diag, dim));
        }
        SyntheticWorld world{SimilarityModel(std::move(head), calib), options.labels, options.bounds,
                             seed};
        double lo = 1.0, hi = 0.0;
        for (std::size_t i = 0; i < kProbePairs; ++i) {
            const double p = world.truth.predict_prob(sample_unit_vector(rng, dim),
                                                      sample_unit_vector(rng, dim));
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        if (lo < 0.05 && hi > 0.95) return world;
    }
    throw NumericalError("could not draw a world whose P* spans (0.05, 0.95)");
}

SyntheticSample sample_dataset(const SyntheticWorld& world, std::size_t n, std::uint64_t seed,
                               const std::string& id_prefix) {
    if (n == 0) throw UsageError("sample size must be positive");
    Rng rng(seed);
    SyntheticSample out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string a = id_prefix + std::to_string(i) + "a";
        const std::string b = id_prefix + std::to_string(i) + "b";
        Embedding ea = sample_unit_vector(rng, world.dim());
        Embedding eb = sample_unit_vector(rng, world.dim());
        const double p_true = world.truth.predict_prob(ea, eb);
        const double label = draw_label(world.labels, p_true, rng);
        out.embeddings.add(a, std::move(ea));
        out.embeddings.add(b, std::move(eb));
        out.dataset.add_prompt({a, "synthetic prompt " + a});
        out.dataset.add_prompt({b, "synthetic prompt " + b});
        out.dataset.add_pair({a, b, label, std::nullopt});
    }
    return out;
}

std::vector<ConvergenceRow> convergence_experiment(const SyntheticWorld& world,
                                                   std::span<const std::size_t> n_list,
                                                   const TrainConfig& cfg_template,
                                                   const ConvergenceOptions& options) {
    if (n_list.empty()) throw UsageError("N list must be non-empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] == 0 || (i > 0 && n_list[i] <= n_list[i - 1])) {
            throw UsageError("N list must be positive and strictly increasing");
        }
    }
    if (options.eval_pairs == 0) throw UsageError("evaluation set must be non-empty");

    const SyntheticSample pool =
        sample_dataset(world, n_list.back(), derive_seed(options.seed, 1), "train");
    const SyntheticSample held_out =
        sample_dataset(world, options.eval_pairs, derive_seed(options.seed, 2), "eval");
    const auto eval_items = held_out.dataset.embed(held_out.embeddings);

    TrainConfig cfg = cfg_template;
    cfg.joint = true;
    if (!cfg.bounds) cfg.bounds = world.bounds;

    std::vector<ConvergenceRow> rows;
    const PairDataset no_validation;
    for (std::size_t n : n_list) {
        std::vector<std::size_t> first_n(n);
        for (std::size_t i = 0; i < n; ++i) first_n[i] = i;
        const PairDataset train_set = pool.dataset.subset(first_n);
        const TrainReport report = train(pool.embeddings, train_set, no_validation, cfg);
        rows.push_back({n, mean_abs_error(report.model, world.truth, eval_items), cfg.loss,
                        options.seed});
    }
    return rows;
}

void write_convergence_csv(std::span<const ConvergenceRow> rows, std::ostream& out) {
    out << "N,mean_abs_error,loss_type,seed\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.mean_abs_error);
        out << r.n << ',' << buf << ',' << to_string(r.loss) << ',' << r.seed << '\n';
    }
}

HardWorld plant_hard_world(std::size_t dim, std::size_t n_prompts, std::uint64_t seed,
                           const PlantOptions& options) {
    if (dim < 4) throw UsageError("planted hard world needs dimension >= 4");
    if (n_prompts < 8) throw UsageError("planted hard world needs at least 8 prompts");
    const double a2 = options.signal_share;
    if (!(a2 > 0.0 && a2 < 0.5)) throw UsageError("signal share must lie in (0, 0.5)");
    if (!(options.sim_lo < options.sim_hi) || options.sim_hi > 1.0 - 2.0 * a2 ||
        options.sim_lo < -1.0 + 2.0 * a2) {
        throw UsageError("base similarity range is not attainable for this signal share");
    }

    const std::size_t n_signal = std::max<std::size_t>(1, dim / 4);
    const std::size_t n_noise = dim - n_signal;
    const std::size_t n_pairs = n_prompts / 2;
    const double noise_scale = std::sqrt(1.0 - a2);
    const double signal_scale = std::sqrt(a2);

    for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
        Rng rng(derive_seed(seed, attempt));
        const auto eye = ProjectionHead::identity(dim).weights();
        std::vector<double> rot(eye.begin(), eye.end());
        if (options.rotate) rot = random_rotation(rng, dim);

        // Planted head: shrink the noise subspace, keep the signal subspace.
        std::vector<double> shrink(dim * dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) shrink[i * dim + i] = i < n_noise ? 0.1 : 1.0;
        ProjectionHead plant(dim, matmul(matmul(rot, shrink, dim), transpose(rot, dim), dim));

        std::vector<int> labels(n_pairs);
        for (std::size_t i = 0; i < n_pairs; ++i) labels[i] = static_cast<int>(i % 2);
        rng.shuffle(std::span<int>(labels));

        HardWorld world{{}, {}, {}, plant, 0.0, 0.0};
        std::vector<double> base_scores, plant_scores;
        for (std::size_t i = 0; i < n_pairs; ++i) {
            // Target base similarity t = (1 - a2) rho +/- a2, drawn independently
            // of the label; rho is solved per label.
            const double t = rng.uniform(options.sim_lo, options.sim_hi);
            const double sign = labels[i] == 1 ? 1.0 : -1.0;
            const double rho = std::clamp((t - sign * a2) / (1.0 - a2), -1.0, 1.0);

            const Embedding nx = sample_unit_vector(rng, n_noise);
            const Embedding s = sample_unit_vector(rng, n_signal);
            // Component of a fresh direction orthogonal to nx.
            std::vector<double> ortho;
            for (;;) {
                const Embedding g = sample_unit_vector(rng, n_noise);
                const double proj = dot(g.values(), nx.values());
                ortho.assign(n_noise, 0.0);
                for (std::size_t k = 0; k < n_noise; ++k) ortho[k] = g[k] - proj * nx[k];
                const double on = l2_norm(ortho);
                if (on > 1e-6) {
                    for (auto& x : ortho) x /= on;
                    break;
                }
            }
            const double perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
            std::vector<double> x(dim), y(dim);
            for (std::size_t k = 0; k < n_noise; ++k) {
                x[k] = noise_scale * nx[k];
                y[k] = noise_scale * (rho * nx[k] + perp * ortho[k]);
            }
            for (std::size_t k = 0; k < n_signal; ++k) {
                x[n_noise + k] = signal_scale * s[k];
                y[n_noise + k] = sign * signal_scale * s[k];
            }
            Embedding ex(rotate(rot, x));
            Embedding ey(rotate(rot, y));

            const std::string a = "p" + std::to_string(2 * i);
            const std::string b = "p" + std::to_string(2 * i + 1);
            base_scores.push_back(cosine_similarity(ex, ey));
            plant_scores.push_back(cosine_similarity(Embedding(plant.apply(ex.values())),
                                                     Embedding(plant.apply(ey.values()))));
            world.prompts.push_back({a, "planted prompt " + a});
            world.prompts.push_back({b, "planted prompt " + b});
            world.dataset.add_prompt(world.prompts[world.prompts.size() - 2]);
            world.dataset.add_prompt(world.prompts.back());
            world.dataset.add_pair({a, b, static_cast<double>(labels[i]), base_scores.back()});
            world.embeddings.add(a, std::move(ex));
            world.embeddings.add(b, std::move(ey));
        }
        world.base_auc = roc_auc(base_scores, labels).auc;
        world.plant_auc = roc_auc(plant_scores, labels).auc;
        if (world.base_auc >= 0.45 && world.base_auc <= 0.55 && world.plant_auc >= 0.99) {
            return world;
        }
    }
    throw NumericalError("could not plant a hard world meeting the AUC targets");
}

}  // namespace promptcache
