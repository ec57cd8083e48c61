#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "promptcache/errors.hpp"
#include "promptcache/model.hpp"

using namespace promptcache;

namespace {

std::string le_double(double v) {
    std::string out(8, '\0');
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    return out;
}

// Unit vectors at a prescribed cosine.
std::pair<Embedding, Embedding> pair_at(double cosine) {
    return {Embedding({1.0, 0.0}), Embedding({cosine, std::sqrt(1.0 - cosine * cosine)})};
}

}  // namespace

TEST(CalibrationParams, Validation) {
    EXPECT_NO_THROW((CalibrationParams{0.01, 88.0}.validate()));
    EXPECT_THROW((CalibrationParams{0.0, 88.0}.validate()), UsageError);
    EXPECT_THROW((CalibrationParams{-1.0, 0.0}.validate()), UsageError);
    EXPECT_THROW((CalibrationParams{0.1, NAN}.validate()), UsageError);
}

TEST(ParamBounds, ContainsAndClamp) {
    const ParamBounds b{0.01, 10.0};
    EXPECT_TRUE(b.contains({0.05, 2.0}));
    EXPECT_FALSE(b.contains({0.001, 2.0}));
    EXPECT_FALSE(b.contains({0.05, -11.0}));
    const auto c = b.clamp({0.001, -11.0});
    EXPECT_EQ(c.lambda, 0.01);
    EXPECT_EQ(c.c, -10.0);
}

TEST(ProjectionHead, IdentityAndValidation) {
    const auto h = ProjectionHead::identity(3);
    EXPECT_EQ(h.at(0, 0), 1.0);
    EXPECT_EQ(h.at(0, 1), 0.0);
    EXPECT_THROW(ProjectionHead(2, {1.0, 0.0, 0.0}), DataError);
    EXPECT_THROW(ProjectionHead(1, {NAN}), DataError);
}

TEST(Project, Examples) {
    const SimilarityModel id(2, {});
    EXPECT_EQ(id.project(Embedding({0.6, 0.8})), Embedding({0.6, 0.8}));
    const SimilarityModel scale(ProjectionHead(2, {2, 0, 0, 2}), {});
    EXPECT_EQ(scale.project(Embedding({1, 0})), Embedding({2, 0}));
    const SimilarityModel swap(ProjectionHead(2, {0, 1, 1, 0}), {});
    EXPECT_EQ(swap.project(Embedding({1, 0})), Embedding({0, 1}));
}

TEST(Project, DegenerateAndMismatch) {
    const SimilarityModel zero(ProjectionHead(2, {0, 0, 0, 1}), {});
    EXPECT_THROW(zero.project(Embedding({1, 0})), NumericalError);
    const SimilarityModel id(2, {});
    EXPECT_THROW(id.project(Embedding({1, 0, 0})), DataError);
}

TEST(Logit, Examples) {
    const SimilarityModel m(2, {0.01, 88.0});
    const Embedding e({0.3, 0.4});
    EXPECT_NEAR(m.logit(e, e), 12.0, 1e-12);
    auto [a, b] = pair_at(0.88);
    EXPECT_NEAR(m.logit(a, b), 0.0, 1e-12);
    const SimilarityModel unit(2, {1.0, 0.0});
    EXPECT_DOUBLE_EQ(unit.logit(a, b), cosine_similarity(a, b));
}

TEST(PredictProb, Examples) {
    const SimilarityModel m(2, {0.01, 88.0});
    auto [a, b] = pair_at(0.88);
    EXPECT_NEAR(m.predict_prob(a, b), 0.5, 1e-12);
    auto [c, d] = pair_at(0.90);
    EXPECT_NEAR(m.predict_prob(c, d), 0.8807970779778823, 1e-12);
    EXPECT_NEAR(m.predict_prob(a, a), 0.9999938558253978, 1e-15);
}

TEST(PredictProb, SymmetricScaleInvariantMonotone) {
    Rng rng(21);
    const SimilarityModel m(ProjectionHead(4, {1, 0.2, 0, 0, 0, 1, 0.3, 0, 0, 0, 1, -0.4, 0.1, 0, 0, 1}),
                            {0.05, 2.0});
    for (int t = 0; t < 200; ++t) {
        const auto a = oracles::random_embedding(rng, 4);
        const auto b = oracles::random_embedding(rng, 4);
        EXPECT_EQ(m.predict_prob(a, b), m.predict_prob(b, a));
        std::vector<double> scaled(a.values().begin(), a.values().end());
        const double alpha = rng.uniform(0.01, 100.0);
        for (auto& v : scaled) v *= alpha;
        EXPECT_NEAR(m.predict_prob(Embedding(scaled), b), m.predict_prob(a, b), 1e-12);
    }
    const SimilarityModel id(2, {0.05, 2.0});
    double prev = -1.0;
    for (double s = -0.99; s <= 0.99; s += 0.01) {
        auto [x, y] = pair_at(s);
        const double p = id.predict_prob(x, y);
        EXPECT_GT(p, prev);
        prev = p;
    }
}

TEST(PredictProb, IdentityInitMatchesRawFormula) {
    Rng rng(8);
    const SimilarityModel m(5, {0.01, 88.0});
    for (int t = 0; t < 100; ++t) {
        const auto a = oracles::random_embedding(rng, 5);
        const auto b = oracles::random_embedding(rng, 5);
        EXPECT_NEAR(m.predict_prob(a, b), sigmoid(cosine_similarity(a, b) / 0.01 - 88.0), 1e-15);
    }
}

TEST(Checkpoint, HandBuiltFileBitExact) {
    const std::string expected = std::string("PCSIM1\n") +
                                 "d=1 lambda=0x3f847ae147ae147b c=0x4056000000000000\n" +
                                 le_double(1.0);
    std::ostringstream out;
    save_checkpoint(SimilarityModel(1, {0.01, 88.0}), out);
    EXPECT_EQ(out.str(), expected);
    std::istringstream in(expected);
    EXPECT_EQ(load_checkpoint(in), SimilarityModel(1, {0.01, 88.0}));
}

TEST(Checkpoint, RoundTripIsBitExact) {
    Rng rng(12);
    std::vector<double> w(16);
    for (auto& x : w) x = rng.normal();
    const SimilarityModel m(ProjectionHead(4, w), {0.1 / 3.0, -1.0 / 7.0});
    std::stringstream io;
    save_checkpoint(m, io);
    const auto back = load_checkpoint(io);
    EXPECT_EQ(back, m);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.calibration().lambda),
              std::bit_cast<std::uint64_t>(m.calibration().lambda));

    const auto path = std::filesystem::temp_directory_path() / "promptcache_model_test.ckpt";
    save_checkpoint(SimilarityModel(3, {}), path);
    EXPECT_EQ(load_checkpoint(path), SimilarityModel(3, {}));
    std::filesystem::remove(path);
}

TEST(Checkpoint, Errors) {
    auto fails = [](const std::string& text) {
        std::istringstream in(text);
        EXPECT_THROW(load_checkpoint(in), DataError);
    };
    fails("PCSIM2\nd=1 lambda=0x3f847ae147ae147b c=0x0\n" + le_double(1.0));
    fails("PCSIM1\nd=1 lambda=0x0000000000000000 c=0x0\n" + le_double(1.0));  // lambda = 0
    fails("PCSIM1\nd=1 lambda=zz c=0x0\n" + le_double(1.0));
    fails("PCSIM1\nd=2 lambda=0x3f847ae147ae147b c=0x0\n" + le_double(1.0));  // truncated
    fails("PCSIM1\nd=1 lambda=0x3f847ae147ae147b c=0x0\n" + le_double(1.0) + "x");
    fails("PCSIM1\nd=1 lambda=0x3f847ae147ae147b c=0x0\n" + le_double(NAN));
    fails("PCSIM1\nlambda=0x3f847ae147ae147b c=0x0\n" + le_double(1.0));
}
