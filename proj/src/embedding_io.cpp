#include "promptcache/embedding_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>

#include "promptcache/errors.hpp"

namespace promptcache {

void EmbeddingStore::add(std::string id, Embedding e) {
    if (id.empty()) throw DataError("embedding id must be non-empty");
    if (by_id_.contains(id)) throw DataError("duplicate embedding id '" + id + "'");
    if (dim_ != 0 && e.dim() != dim_) {
        throw DataError("embedding '" + id + "' has dimension " + std::to_string(e.dim()) +
                        ", store expects " + std::to_string(dim_));
    }
    dim_ = e.dim();
    by_id_.emplace(id, vectors_.size());
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(e));
}

const Embedding& EmbeddingStore::at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw DataError("no embedding for prompt id '" + id + "'");
    return vectors_[it->second];
}

namespace detail {

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
        throw DataError("unexpected end of binary payload");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

std::size_t parse_size_field(const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos || (pos != 0 && line[pos - 1] != ' ')) {
        throw DataError("header is missing '" + key + "=': " + line);
    }
    const char* first = line.data() + pos + key.size() + 1;
    const char* last = line.data() + line.size();
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first || (ptr != last && *ptr != ' ')) {
        throw DataError("header field '" + key + "' is not a non-negative integer: " + line);
    }
    return value;
}

}  // namespace

void write_u32_le(std::ostream& out, std::uint32_t v) { write_le(out, v); }
std::uint32_t read_u32_le(std::istream& in) { return read_le<std::uint32_t>(in); }
void write_f32_le(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
float read_f32_le(std::istream& in) { return std::bit_cast<float>(read_le<std::uint32_t>(in)); }
void write_f64_le(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
double read_f64_le(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

std::pair<std::size_t, std::size_t> parse_dn_header(const std::string& line) {
    return {parse_size_field(line, "d"), parse_size_field(line, "n")};
}

std::string read_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(std::string(what) + ": truncated header");
    return line;
}

void expect_magic(std::istream& in, const char* magic, const char* what) {
    const std::size_t len = std::strlen(magic);
    std::string got(len, '\0');
    in.read(got.data(), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len) || got != magic) {
        throw DataError(std::string(what) + ": bad magic (not a " +
                        std::string(magic, len - 1) + " file)");
    }
}

}  // namespace detail

EmbeddingStore read_embeddings(std::istream& in) {
    detail::expect_magic(in, kEmbeddingMagic, "embedding file");
    const auto [d, n] = detail::parse_dn_header(detail::read_line(in, "embedding file"));
    if (d == 0) throw DataError("embedding file: d must be positive");
    EmbeddingStore store;
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint32_t len = detail::read_u32_le(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (in.gcount() != static_cast<std::streamsize>(len)) {
            throw DataError("embedding file: truncated id in record " + std::to_string(r));
        }
        std::vector<double> values(d);
        for (auto& v : values) v = static_cast<double>(detail::read_f32_le(in));
        try {
            store.add(std::move(id), Embedding(std::move(values)));
        } catch (const DataError& e) {
            throw DataError("embedding file record " + std::to_string(r) + ": " + e.what());
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("embedding file: trailing bytes after " + std::to_string(n) + " records");
    }
    return store;
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding file " + path.string());
    return read_embeddings(in);
}

void write_embeddings(const EmbeddingStore& store, std::ostream& out) {
    if (store.empty()) throw DataError("refusing to write an empty embedding store");
    out.write(kEmbeddingMagic, sizeof(kEmbeddingMagic) - 1);
    out << "d=" << store.dim() << " n=" << store.size() << "\n";
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& id = store.ids()[i];
        if (id.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("id too long");
        detail::write_u32_le(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (double v : store.at_index(i).values()) detail::write_f32_le(out, static_cast<float>(v));
    }
}

void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write embedding file " + path.string());
    write_embeddings(store, out);
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace promptcache
