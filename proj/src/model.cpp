#include "promptcache/model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "promptcache/embedding_io.hpp"
#include "promptcache/errors.hpp"

namespace promptcache {

void CalibrationParams::validate() const {
    if (!std::isfinite(lambda) || !(lambda > 0.0)) {
        throw UsageError("lambda must be finite and positive");
    }
    if (!std::isfinite(c)) throw UsageError("c must be finite");
}

void ParamBounds::validate() const {
    if (!std::isfinite(min_lambda) || !(min_lambda > 0.0)) {
        throw UsageError("lambda lower bound must be positive");
    }
    if (!std::isfinite(max_abs_c) || !(max_abs_c > 0.0)) {
        throw UsageError("bound on |c| must be positive");
    }
}

bool ParamBounds::contains(const CalibrationParams& p) const {
    return p.lambda >= min_lambda && std::abs(p.c) <= max_abs_c;
}

CalibrationParams ParamBounds::clamp(const CalibrationParams& p) const {
    return {std::max(p.lambda, min_lambda), std::clamp(p.c, -max_abs_c, max_abs_c)};
}

ProjectionHead ProjectionHead::identity(std::size_t dim) {
    std::vector<double> w(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
    return ProjectionHead(dim, std::move(w));
}

ProjectionHead::ProjectionHead(std::size_t dim, std::vector<double> weights)
    : dim_(dim), weights_(std::move(weights)) {
    if (dim_ == 0) throw DataError("projection head dimension must be positive");
    if (weights_.size() != dim_ * dim_) {
        throw DataError("projection head expects " + std::to_string(dim_ * dim_) +
                        " weights, got " + std::to_string(weights_.size()));
    }
    for (double w : weights_) {
        if (!std::isfinite(w)) throw DataError("projection head contains a non-finite weight");
    }
}

void ProjectionHead::apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_ || out.size() != dim_) {
        throw DataError("projection head of dimension " + std::to_string(dim_) +
                        " applied to a vector of dimension " + std::to_string(x.size()));
    }
    for (std::size_t r = 0; r < dim_; ++r) {
        out[r] = dot(std::span<const double>(weights_).subspan(r * dim_, dim_), x);
    }
}

std::vector<double> ProjectionHead::apply(std::span<const double> x) const {
    std::vector<double> out(dim_);
    apply(x, out);
    return out;
}

SimilarityModel::SimilarityModel(std::size_t dim, CalibrationParams calib)
    : SimilarityModel(ProjectionHead::identity(dim), calib) {}

SimilarityModel::SimilarityModel(ProjectionHead head, CalibrationParams calib)
    : head_(std::move(head)), calib_(calib) {
    calib_.validate();
}

void SimilarityModel::set_calibration(CalibrationParams calib) {
    calib.validate();
    calib_ = calib;
}

Embedding SimilarityModel::project(const Embedding& e) const {
    auto projected = head_.apply(e.values());
    if (!(l2_norm(projected) >= kDegenerateProjectionNorm)) {
        throw NumericalError("degenerate projection: projected embedding has norm below 1e-12");
    }
    return Embedding(std::move(projected));
}

double SimilarityModel::similarity(const Embedding& e1, const Embedding& e2) const {
    return cosine_similarity(project(e1), project(e2));
}

double SimilarityModel::logit(const Embedding& e1, const Embedding& e2) const {
    return similarity(e1, e2) / calib_.lambda - calib_.c;
}

double SimilarityModel::predict_prob(const Embedding& e1, const Embedding& e2) const {
    return sigmoid(logit(e1, e2));
}

namespace {

std::string hex_bits(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%016llx",
                  static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
    return buf;
}

std::string header_value(const std::string& line, const std::string& key) {
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
        if (field.rfind(key + "=", 0) == 0) return field.substr(key.size() + 1);
    }
    throw DataError("checkpoint header is missing '" + key + "=': " + line);
}

double parse_hex_bits(const std::string& text, const char* key) {
    std::string_view digits = text;
    if (digits.starts_with("0x") || digits.starts_with("0X")) digits.remove_prefix(2);
    std::uint64_t bits = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bits, 16);
    if (digits.empty() || digits.size() > 16 || ec != std::errc() ||
        ptr != digits.data() + digits.size()) {
        throw DataError(std::string("checkpoint field '") + key + "' is not a hex bit pattern");
    }
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const SimilarityModel& model, std::ostream& out) {
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    out << "d=" << model.dim() << " lambda=" << hex_bits(model.calibration().lambda)
        << " c=" << hex_bits(model.calibration().c) << "\n";
    for (double w : model.head().weights()) detail::write_f64_le(out, w);
}

void save_checkpoint(const SimilarityModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    save_checkpoint(model, out);
    if (!out) throw DataError("write failed for " + path.string());
}

SimilarityModel load_checkpoint(std::istream& in) {
    detail::expect_magic(in, kCheckpointMagic, "checkpoint");
    const std::string header = detail::read_line(in, "checkpoint");
    std::size_t d = 0;
    {
        const std::string dtext = header_value(header, "d");
        auto [ptr, ec] = std::from_chars(dtext.data(), dtext.data() + dtext.size(), d);
        if (ec != std::errc() || ptr != dtext.data() + dtext.size() || d == 0) {
            throw DataError("checkpoint dimension must be a positive integer");
        }
    }
    CalibrationParams calib{parse_hex_bits(header_value(header, "lambda"), "lambda"),
                            parse_hex_bits(header_value(header, "c"), "c")};
    try {
        calib.validate();
    } catch (const UsageError& e) {
        throw DataError(std::string("checkpoint has invalid calibration: ") + e.what());
    }
    std::vector<double> weights(d * d);
    for (auto& w : weights) w = detail::read_f64_le(in);
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("checkpoint has trailing bytes after a " + std::to_string(d) + "x" +
                        std::to_string(d) + " head");
    }
    return SimilarityModel(ProjectionHead(d, std::move(weights)), calib);
}

SimilarityModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return load_checkpoint(in);
}

}  // namespace promptcache
