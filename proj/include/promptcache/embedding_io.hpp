#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "promptcache/core.hpp"

namespace promptcache {

/// Id-keyed embedding table of uniform dimension. Iteration follows insertion
/// order so files written from a store are reproducible.
class EmbeddingStore {
public:
    EmbeddingStore() = default;

    /// Throws DataError on a duplicate id or a dimension mismatch.
    void add(std::string id, Embedding e);

    bool contains(const std::string& id) const { return by_id_.contains(id); }

    /// Throws DataError naming the id if it is absent.
    const Embedding& at(const std::string& id) const;

    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    /// 0 while empty.
    std::size_t dim() const noexcept { return dim_; }

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Embedding& at_index(std::size_t i) const { return vectors_[i]; }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<Embedding> vectors_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Embedding file ("PCEMB1"): magic line, "d=<int> n=<int>" header line, then
// per record a u32 little-endian id length, the id bytes, and d little-endian
// IEEE-754 binary32 values. Values are widened to double on load.
inline constexpr char kEmbeddingMagic[] = "PCEMB1\n";

EmbeddingStore read_embeddings(std::istream& in);
EmbeddingStore read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingStore& store, std::ostream& out);
void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

namespace detail {

// Shared little-endian helpers for the binary formats.
void write_u32_le(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32_le(std::istream& in);
void write_f32_le(std::ostream& out, float v);
float read_f32_le(std::istream& in);
void write_f64_le(std::ostream& out, double v);
double read_f64_le(std::istream& in);

// Parses "d=<int> n=<int>" into (d, n).
std::pair<std::size_t, std::size_t> parse_dn_header(const std::string& line);

// Reads one "\n"-terminated line; throws DataError on EOF.
std::string read_line(std::istream& in, const char* what);

void expect_magic(std::istream& in, const char* magic, const char* what);

}  // namespace detail

}  // namespace promptcache
