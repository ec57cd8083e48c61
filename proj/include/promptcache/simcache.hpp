#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptcache/dataset.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/index.hpp"
#include "promptcache/model.hpp"

namespace promptcache {

struct CacheEntry {
    std::string prompt_id;
    Embedding embedding;
    std::string response;
};

/// Stand-in for the language-model call: a deterministic placeholder.
std::string placeholder_response(const std::string& prompt_id);

struct CacheLookup {
    const CacheEntry* entry;
    double similarity;
};

/// Unlimited-size cache with exact cosine lookup. Entries are keyed by
/// insertion position, so the same prompt id may be cached twice.
class SimCache {
public:
    SimCache(std::size_t dim, double tau);

    /// Best match, or nullopt if the cache is empty.
    std::optional<CacheLookup> lookup(const Embedding& query) const;
    /// Hit iff the cache is non-empty and the best similarity exceeds tau.
    std::optional<CacheLookup> match(const Embedding& query) const;
    void insert(CacheEntry entry);

    std::size_t size() const noexcept { return entries_.size(); }
    double tau() const noexcept { return tau_; }
    const CacheEntry& entry(std::size_t i) const { return entries_.at(i); }

private:
    double tau_;
    VectorIndex index_;
    std::vector<CacheEntry> entries_;
};

/// Judges whether a hit of `query` on cached prompt `cached` is correct.
class HitJudge {
public:
    virtual ~HitJudge() = default;
    virtual bool correct(const std::string& query, const std::string& cached) const = 0;
};

/// Ground-truth relation: a set of unordered label-1 prompt-id pairs.
/// A hit on an identical prompt id is also correct.
class HitOracle : public HitJudge {
public:
    HitOracle() = default;
    void add(const std::string& a, const std::string& b);
    bool contains(const std::string& a, const std::string& b) const;
    bool correct(const std::string& query, const std::string& cached) const override;
    std::size_t size() const noexcept { return pairs_.size(); }
    const std::set<std::pair<std::string, std::string>>& pairs() const noexcept { return pairs_; }

private:
    std::set<std::pair<std::string, std::string>> pairs_;
};

enum class Decision { kMiss, kCorrectHit, kFalseHit };
std::string_view to_string(Decision d);

struct SimEvent {
    std::string prompt_id;
    Decision decision;
    std::optional<std::string> matched_id;
    std::optional<double> similarity;
    std::optional<bool> verdict;
};

struct SimReport {
    std::size_t n_correct_hit = 0;
    std::size_t n_false_hit = 0;
    std::size_t n_miss = 0;
    std::size_t n_expected_hit = 1;
    double tau = 0.0;
    std::vector<SimEvent> events;

    /// (nCorrectHit - nFalseHit) / nExpectedHit.
    double efficiency() const;
    std::size_t stream_length() const noexcept { return n_correct_hit + n_false_hit + n_miss; }
};

/// Efficiency from raw counters; throws UsageError if n_expected_hit == 0.
double caching_efficiency(std::size_t n_correct_hit, std::size_t n_false_hit,
                          std::size_t n_expected_hit);

/// Streams `stream` through an empty cache. With a model, embeddings are
/// projected by its head before lookup (the raw base similarity otherwise).
/// Misses insert; hits insert nothing and are judged.
SimReport simulate(std::span<const std::string> stream, const EmbeddingStore& embeddings,
                   const SimilarityModel* model, double tau, const HitJudge& judge,
                   std::size_t n_expected_hit);

struct SimStream {
    std::vector<std::string> prompts;
    HitOracle oracle;
    std::size_t n_expected_hit = 0;
};

/// Samples n_pos label-1 and n_neg label-0 pairs without replacement and
/// shuffles their 2(n_pos + n_neg) prompts. nExpectedHit = n_pos.
SimStream build_stream(const PairDataset& test_pairs, std::size_t n_pos, std::size_t n_neg,
                       std::uint64_t seed);

struct SweepRow {
    double tau;
    double efficiency;
    std::size_t n_correct_hit;
    std::size_t n_false_hit;
    std::size_t n_miss;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// Index of the best efficiency (first on ties).
    std::size_t best = 0;
};

/// One fresh simulation per tau; runs execute in parallel.
SweepResult sweep_thresholds(std::span<const std::string> stream, const EmbeddingStore& embeddings,
                             const SimilarityModel* model, std::span<const double> taus,
                             const HitJudge& judge, std::size_t n_expected_hit);

/// CSV with header "tau,efficiency,nCorrectHit,nFalseHit,nMiss".
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);

/// 0.88, 0.89, ..., 0.94.
std::vector<double> default_tau_grid();

}  // namespace promptcache
