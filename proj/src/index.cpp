#include "promptcache/index.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <mutex>

#include "promptcache/embedding_io.hpp"
#include "promptcache/errors.hpp"

namespace promptcache {

VectorIndex::VectorIndex(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw DataError("index dimension must be positive");
}

VectorIndex::VectorIndex(const VectorIndex& other) {
    std::shared_lock lock(other.mutex_);
    dim_ = other.dim_;
    entries_ = other.entries_;
    by_id_ = other.by_id_;
}

VectorIndex& VectorIndex::operator=(const VectorIndex& other) {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        dim_ = other.dim_;
        entries_ = other.entries_;
        by_id_ = other.by_id_;
    }
    return *this;
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept
    : dim_(other.dim_), entries_(std::move(other.entries_)), by_id_(std::move(other.by_id_)) {}

VectorIndex& VectorIndex::operator=(VectorIndex&& other) noexcept {
    dim_ = other.dim_;
    entries_ = std::move(other.entries_);
    by_id_ = std::move(other.by_id_);
    return *this;
}

void VectorIndex::insert(std::string id, const Embedding& e) {
    if (e.dim() != dim_) {
        throw DataError("index expects dimension " + std::to_string(dim_) + ", got " +
                        std::to_string(e.dim()));
    }
    std::unique_lock lock(mutex_);
    if (by_id_.contains(id)) throw DataError("duplicate index id '" + id + "'");
    by_id_.emplace(id, entries_.size());
    entries_.push_back({std::move(id), std::vector<double>(e.values().begin(), e.values().end()),
                        e.norm()});
}

std::vector<Neighbor> VectorIndex::nearest(const Embedding& query, std::size_t k) const {
    if (query.dim() != dim_) {
        throw DataError("query dimension " + std::to_string(query.dim()) +
                        " does not match index dimension " + std::to_string(dim_));
    }
    std::shared_lock lock(mutex_);
    if (entries_.empty()) throw DataError("nearest-neighbor query on an empty index");
    if (k == 0 || k > entries_.size()) {
        throw DataError("requested " + std::to_string(k) + " neighbors from an index of " +
                        std::to_string(entries_.size()));
    }
    struct Scored {
        double sim;
        std::size_t pos;
    };
    std::vector<Scored> scored(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        const double s = dot(query.values(), e.values) / (query.norm() * e.norm);
        scored[i] = {std::clamp(s, -1.0, 1.0), i};
    }
    auto better = [](const Scored& a, const Scored& b) {
        return a.sim > b.sim || (a.sim == b.sim && a.pos < b.pos);
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                      scored.end(), better);
    std::vector<Neighbor> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back({entries_[scored[i].pos].id, scored[i].sim});
    return out;
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

bool VectorIndex::contains(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return by_id_.contains(id);
}

void VectorIndex::save(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    out.write(kIndexMagic, sizeof(kIndexMagic) - 1);
    out << "d=" << dim_ << " n=" << entries_.size() << "\n";
    for (const auto& e : entries_) {
        if (e.id.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("id too long");
        detail::write_u32_le(out, static_cast<std::uint32_t>(e.id.size()));
        out.write(e.id.data(), static_cast<std::streamsize>(e.id.size()));
        for (double v : e.values) detail::write_f32_le(out, static_cast<float>(v));
    }
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write index snapshot " + path.string());
    save(out);
}

VectorIndex VectorIndex::load(std::istream& in) {
    detail::expect_magic(in, kIndexMagic, "index snapshot");
    const auto [d, n] = detail::parse_dn_header(detail::read_line(in, "index snapshot"));
    VectorIndex index(d);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint32_t len = detail::read_u32_le(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (in.gcount() != static_cast<std::streamsize>(len)) {
            throw DataError("index snapshot: truncated id in entry " + std::to_string(r));
        }
        std::vector<double> values(d);
        for (auto& v : values) v = static_cast<double>(detail::read_f32_le(in));
        index.insert(std::move(id), Embedding(std::move(values)));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("index snapshot: trailing bytes after " + std::to_string(n) + " entries");
    }
    return index;
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open index snapshot " + path.string());
    return load(in);
}

}  // namespace promptcache
