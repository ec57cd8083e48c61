#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptcache/core.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/loss.hpp"

namespace promptcache {

/// (q1, q2, p) record. `similarity` caches the base-embedding cosine when known.
struct LabeledPair {
    std::string first_id;
    std::string second_id;
    double label = 0.0;
    std::optional<double> similarity;

    friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// Labeled pairs plus the prompt table they reference.
///
/// Invariants, enforced on insertion: every pair id resolves in the prompt
/// table, q1 != q2, labels lie in [0, 1], and no unordered pair repeats.
class PairDataset {
public:
    /// Re-adding an id with identical text is a no-op; different text throws.
    void add_prompt(Prompt prompt);
    void add_pair(LabeledPair pair);

    const std::vector<LabeledPair>& pairs() const noexcept { return pairs_; }
    const std::map<std::string, Prompt>& prompts() const noexcept { return prompts_; }
    const Prompt& prompt(const std::string& id) const;
    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }

    /// Pairs at the given positions, in that order, with their prompts.
    PairDataset subset(std::span<const std::size_t> positions) const;

    /// Replaces every label by clip(label, lo, hi).
    void clip_labels(double lo, double hi);

    /// Embedded view of the pairs; throws DataError on a missing embedding.
    std::vector<PairItem> embed(const EmbeddingStore& store) const;

    friend bool operator==(const PairDataset& a, const PairDataset& b) {
        return a.pairs_ == b.pairs_ && a.prompts_ == b.prompts_;
    }

private:
    std::vector<LabeledPair> pairs_;
    std::map<std::string, Prompt> prompts_;
    std::set<std::pair<std::string, std::string>> seen_;
};

// Pairs file: UTF-8 JSON Lines. Each record carries "q1", "q2" (prompt text)
// and "label" in [0, 1]; optional "sim", and optional "id1"/"id2". Without
// ids a prompt's text doubles as its id.
PairDataset read_pairs(std::istream& in);
PairDataset read_pairs(const std::filesystem::path& path);
void write_pairs(const PairDataset& dataset, std::ostream& out);
void write_pairs(const PairDataset& dataset, const std::filesystem::path& path);

// Prompt table file: JSON Lines with "id" and "text".
std::vector<Prompt> read_prompts(std::istream& in);
std::vector<Prompt> read_prompts(const std::filesystem::path& path);
void write_prompts(std::span<const Prompt> prompts, std::ostream& out);
void write_prompts(std::span<const Prompt> prompts, const std::filesystem::path& path);

/// Drops prompts whose text repeats an earlier prompt's text. Throws
/// DataError on duplicate or empty ids.
std::vector<Prompt> dedupe_prompts(std::span<const Prompt> prompts);

struct MineOptions {
    std::size_t k = 3;
    /// When set, only this many prompts (drawn uniformly with `seed`) act as
    /// queries; neighbors are still searched among all prompts.
    std::optional<std::size_t> sample;
    std::uint64_t seed = 0;
};

struct CandidatePair {
    std::string first_id;
    std::string second_id;
    double similarity;

    friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// Each query prompt paired with its k exact cosine nearest neighbors
/// (excluding itself); unordered duplicates are dropped, keeping the first.
/// Throws DataError if k == 0, k >= prompts.size(), or an embedding is missing.
std::vector<CandidatePair> mine_pairs(std::span<const Prompt> prompts,
                                      const EmbeddingStore& embeddings,
                                      const MineOptions& options = {});

/// Hard-dataset selection: sort pairs by ascending base similarity (ties by
/// ids), then keep a pair only when its label differs from the last kept
/// label, which starts at 1. Labels must be exactly 0 or 1 (DataError).
PairDataset build_hard_dataset(const PairDataset& labeled, const EmbeddingStore& embeddings);

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct DatasetSplit {
    PairDataset train;
    PairDataset val;
    PairDataset test;
};

/// Seeded shuffle, then contiguous slices of floor(train*N), floor(val*N) and
/// the remainder. Throws UsageError on bad ratios, DataError if N < 3.
DatasetSplit split(const PairDataset& dataset, const SplitRatios& ratios, std::uint64_t seed);

/// Slice sizes used by split().
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

}  // namespace promptcache
