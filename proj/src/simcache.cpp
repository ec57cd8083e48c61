#include "promptcache/simcache.hpp"

#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>

#include "promptcache/errors.hpp"
#include "promptcache/rng.hpp"

namespace promptcache {

std::string placeholder_response(const std::string& prompt_id) {
    return "response:" + prompt_id;
}

SimCache::SimCache(std::size_t dim, double tau) : tau_(tau), index_(dim) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("tau must lie in [0, 1]");
}

std::optional<CacheLookup> SimCache::lookup(const Embedding& query) const {
    if (entries_.empty()) return std::nullopt;
    const auto nn = index_.nearest(query, 1);
    const std::size_t pos = std::stoul(nn.front().id);
    return CacheLookup{&entries_[pos], nn.front().similarity};
}

std::optional<CacheLookup> SimCache::match(const Embedding& query) const {
    auto best = lookup(query);
    if (!best || best->similarity <= tau_) return std::nullopt;
    return best;
}

void SimCache::insert(CacheEntry entry) {
    index_.insert(std::to_string(entries_.size()), entry.embedding);
    entries_.push_back(std::move(entry));
}

void HitOracle::add(const std::string& a, const std::string& b) {
    pairs_.insert(a < b ? std::pair{a, b} : std::pair{b, a});
}

bool HitOracle::contains(const std::string& a, const std::string& b) const {
    return pairs_.contains(a < b ? std::pair{a, b} : std::pair{b, a});
}

bool HitOracle::correct(const std::string& query, const std::string& cached) const {
    return query == cached || contains(query, cached);
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::kMiss: return "miss";
        case Decision::kCorrectHit: return "correct_hit";
        case Decision::kFalseHit: return "false_hit";
    }
    return "?";
}

double caching_efficiency(std::size_t n_correct_hit, std::size_t n_false_hit,
                          std::size_t n_expected_hit) {
    if (n_expected_hit == 0) throw UsageError("nExpectedHit must be positive");
    return (static_cast<double>(n_correct_hit) - static_cast<double>(n_false_hit)) /
           static_cast<double>(n_expected_hit);
}

double SimReport::efficiency() const {
    return caching_efficiency(n_correct_hit, n_false_hit, n_expected_hit);
}

SimReport simulate(std::span<const std::string> stream, const EmbeddingStore& embeddings,
                   const SimilarityModel* model, double tau, const HitJudge& judge,
                   std::size_t n_expected_hit) {
    if (n_expected_hit == 0) throw UsageError("nExpectedHit must be positive");
    if (model && model->dim() != embeddings.dim()) {
        throw DataError("model dimension does not match the embeddings");
    }
    SimCache cache(embeddings.dim(), tau);
    SimReport report;
    report.n_expected_hit = n_expected_hit;
    report.tau = tau;
    report.events.reserve(stream.size());

    for (const auto& id : stream) {
        const Embedding& base = embeddings.at(id);
        Embedding v = model ? Embedding(model->project(base)) : base;
        SimEvent ev{id, Decision::kMiss, std::nullopt, std::nullopt, std::nullopt};
        const auto best = cache.lookup(v);
        if (best) {
            ev.matched_id = best->entry->prompt_id;
            ev.similarity = best->similarity;
        }
        if (best && best->similarity > tau) {
            const bool ok = judge.correct(id, best->entry->prompt_id);
            ev.verdict = ok;
            ev.decision = ok ? Decision::kCorrectHit : Decision::kFalseHit;
            ++(ok ? report.n_correct_hit : report.n_false_hit);
        } else {
            ++report.n_miss;
            cache.insert({id, std::move(v), placeholder_response(id)});
        }
        report.events.push_back(std::move(ev));
    }
    return report;
}

SimStream build_stream(const PairDataset& test_pairs, std::size_t n_pos, std::size_t n_neg,
                       std::uint64_t seed) {
    if (n_pos == 0) throw UsageError("n_pos must be positive (it is nExpectedHit)");
    std::vector<std::size_t> pos, neg;
    const auto& pairs = test_pairs.pairs();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        (pairs[i].label >= 0.5 ? pos : neg).push_back(i);
    }
    if (pos.size() < n_pos || neg.size() < n_neg) {
        throw DataError("need " + std::to_string(n_pos) + " label-1 and " + std::to_string(n_neg) +
                        " label-0 pairs, have " + std::to_string(pos.size()) + " and " +
                        std::to_string(neg.size()));
    }
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(pos));
    rng.shuffle(std::span<std::size_t>(neg));

    SimStream out;
    out.n_expected_hit = n_pos;
    for (std::size_t i = 0; i < n_pos; ++i) {
        const auto& p = pairs[pos[i]];
        out.oracle.add(p.first_id, p.second_id);
        out.prompts.push_back(p.first_id);
        out.prompts.push_back(p.second_id);
    }
    for (std::size_t i = 0; i < n_neg; ++i) {
        const auto& p = pairs[neg[i]];
        out.prompts.push_back(p.first_id);
        out.prompts.push_back(p.second_id);
    }
    rng.shuffle(std::span<std::string>(out.prompts));
    return out;
}

SweepResult sweep_thresholds(std::span<const std::string> stream, const EmbeddingStore& embeddings,
                             const SimilarityModel* model, std::span<const double> taus,
                             const HitJudge& judge, std::size_t n_expected_hit) {
    if (taus.empty()) throw UsageError("tau list must be non-empty");
    std::vector<std::future<SimReport>> runs;
    runs.reserve(taus.size());
    for (double tau : taus) {
        runs.push_back(std::async(std::launch::async, [&, tau] {
            return simulate(stream, embeddings, model, tau, judge, n_expected_hit);
        }));
    }
    SweepResult result;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const SimReport r = runs[i].get();
        result.rows.push_back({taus[i], r.efficiency(), r.n_correct_hit, r.n_false_hit, r.n_miss});
        if (result.rows[i].efficiency > result.rows[result.best].efficiency) result.best = i;
    }
    return result;
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
    out << "tau,efficiency,nCorrectHit,nFalseHit,nMiss\n";
    char buf[96];
    for (const auto& r : sweep.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.tau, r.efficiency);
        out << buf << ',' << r.n_correct_hit << ',' << r.n_false_hit << ',' << r.n_miss << '\n';
    }
}

std::vector<double> default_tau_grid() {
    std::vector<double> taus;
    for (int i = 88; i <= 94; ++i) taus.push_back(i / 100.0);
    return taus;
}

}  // namespace promptcache
