#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "promptcache/core.hpp"

namespace promptcache {

struct Neighbor {
    std::string id;
    double similarity;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact cosine nearest-neighbor search by full scan.
///
/// Results are the k largest similarities, ties broken by insertion order
/// (earlier entries first). Concurrent queries are safe; inserts take an
/// exclusive lock so a query never observes a half-written entry.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dim);

    VectorIndex(const VectorIndex& other);
    VectorIndex& operator=(const VectorIndex& other);
    VectorIndex(VectorIndex&& other) noexcept;
    VectorIndex& operator=(VectorIndex&& other) noexcept;

    /// Throws DataError on a duplicate id or dimension mismatch.
    void insert(std::string id, const Embedding& e);

    /// Throws DataError if the index is empty, k == 0 or k > size().
    std::vector<Neighbor> nearest(const Embedding& query, std::size_t k) const;

    std::size_t size() const;
    std::size_t dim() const noexcept { return dim_; }
    bool contains(const std::string& id) const;

    // Snapshot ("PCIDX1"): magic line, "d=<int> n=<int>", then per entry a
    // u32 little-endian id length, id bytes and d little-endian binary32
    // values. Norms are recomputed in double precision on load.
    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static VectorIndex load(std::istream& in);
    static VectorIndex load(const std::filesystem::path& path);

private:
    struct Entry {
        std::string id;
        std::vector<double> values;
        double norm;
    };

    std::size_t dim_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
    mutable std::shared_mutex mutex_;
};

inline constexpr char kIndexMagic[] = "PCIDX1\n";

}  // namespace promptcache
