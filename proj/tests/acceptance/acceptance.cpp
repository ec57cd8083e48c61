// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "promptcache/dataset.hpp"
#include "promptcache/loss.hpp"
#include "promptcache/metrics.hpp"
#include "promptcache/simcache.hpp"
#include "promptcache/synth.hpp"
#include "promptcache/train.hpp"

namespace fs = std::filesystem;
using namespace promptcache;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// 1. Analytic gradients against central differences.
Outcome gradient_correctness() {
    Rng rng(1001);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto prob = oracles::random_problem(rng, 4, 8);
        const auto batch = prob.batch();
        worst = std::max(worst, oracles::finite_difference_check(prob.model, batch, bce_loss,
                                                                 bce_grad(prob.model, batch))
                                    .max_rel_error);
        worst = std::max(worst, oracles::finite_difference_check(prob.model, batch, sld_loss,
                                                                 sld_grad(prob.model, batch))
                                    .max_rel_error);
    }
    return {worst <= 1e-4, "max relative error " + fmt("%.2e", worst)};
}

// 2. Alternating hard dataset of 2k = 200 items scores (k+1)/(2k) by base similarity.
Outcome hard_dataset_auc_law() {
    Rng rng(1002);
    PairDataset ds;
    EmbeddingStore store;
    std::size_t serial = 0;
    auto add = [&](double sim, int label) {
        const std::string a = "a" + std::to_string(serial), b = "b" + std::to_string(serial);
        ++serial;
        store.add(a, Embedding({1.0, 0.0}));
        store.add(b, Embedding({sim, std::sqrt(1.0 - sim * sim)}));
        ds.add_prompt({a, a});
        ds.add_prompt({b, b});
        ds.add_pair({a, b, static_cast<double>(label), std::nullopt});
    };
    // Kept items alternate 0, 1, ...; a redundant item repeating the last
    // kept label sits right after each kept one and must be dropped.
    for (int i = 0; i < 200; ++i) {
        const double sim = -0.9 + 0.009 * i;
        add(sim, i % 2);
        if (rng.bernoulli(0.5)) add(sim + 0.003, i % 2);
    }
    const auto hard = build_hard_dataset(ds, store);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : hard.pairs()) {
        scores.push_back(cosine_similarity(store.at(p.first_id), store.at(p.second_id)));
        labels.push_back(static_cast<int>(p.label));
    }
    if (scores.size() != 200) return {false, "kept " + std::to_string(scores.size()) + " items"};
    const double expected = 101.0 / 200.0;
    const double brute = oracles::brute_force_auc(scores, labels);
    const double trap = roc_auc(scores, labels).auc;
    const bool ok = std::abs(brute - expected) <= 1e-12 && std::abs(trap - expected) <= 1e-12;
    return {ok, "AUC " + fmt("%.15f", trap) + " (brute force " + fmt("%.15f", brute) + ")"};
}

// 3. Trapezoid AUC equals the Mann-Whitney count.
Outcome auc_oracle_equivalence() {
    Rng rng(1003);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(499);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        const bool coarse = t % 2 == 0;  // every other instance is tie-heavy
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = coarse ? static_cast<double>(rng.below(10)) : rng.normal();
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
        }
        labels[0] = 1;
        labels[1] = 0;
        worst = std::max(worst, std::abs(roc_auc(scores, labels).auc -
                                         oracles::brute_force_auc(scores, labels)));
    }
    return {worst <= 1e-12, "max deviation " + fmt("%.2e", worst)};
}

// 4. Convergence to the ground truth on a realizable synthetic world.
Outcome synthetic_convergence() {
    const std::vector<std::size_t> ns{250, 1000, 4000};
    auto run = [&](LossType loss, LabelMode labels) {
        WorldOptions opts;
        opts.labels = labels;
        const auto world = make_world(16, 1, opts);
        TrainConfig cfg = TrainConfig::defaults_for(loss);
        cfg.learning_rate = 0.01;
        cfg.epochs = 1000;
        cfg.batch_size = ns.back();
        cfg.calibration = {0.1, 0.0};
        cfg.weight_decay = 0.0;
        cfg.joint = true;
        std::vector<double> errs;
        for (const auto& r : convergence_experiment(world, ns, cfg, {10000, 1})) {
            errs.push_back(r.mean_abs_error);
        }
        return errs;
    };
    const auto bce = run(LossType::kBce, LabelMode::kBernoulli);
    const auto sld = run(LossType::kSld, LabelMode::kExact);
    bool ok = bce.back() <= 0.05 && sld.back() <= 0.08;
    for (std::size_t i = 1; i < ns.size(); ++i) ok = ok && bce[i] <= 1.1 * bce[i - 1];
    std::string detail = "bce";
    for (double e : bce) detail += " " + fmt("%.4f", e);
    detail += ", sld";
    for (double e : sld) detail += " " + fmt("%.4f", e);
    return {ok, detail};
}

// 5. Training lifts validation AUC on a planted hard world.
Outcome planted_auc_lift() {
    const HardWorld w = plant_hard_world(16, 40000, 7);
    const auto parts = split(w.dataset, {}, 7);
    std::string detail = "base " + fmt("%.3f", w.base_auc);
    bool ok = w.base_auc >= 0.45 && w.base_auc <= 0.55;
    for (LossType loss : {LossType::kBce, LossType::kSld}) {
        const auto rep = train(w.embeddings, parts.train, parts.val, TrainConfig::defaults_for(loss));
        detail += std::string(", ") + std::string(to_string(loss)) + " " +
                  fmt("%.3f", rep.initial_val_auc) + " -> " + fmt("%.3f", rep.val_auc.back());
        ok = ok && rep.val_auc.size() == 20 && rep.val_auc.back() >= 0.95;
    }
    return {ok, detail};
}

// 6. Hand trace of [a, b, a'] plus conservation on random streams.
Outcome simulator_trace() {
    EmbeddingStore store;
    store.add("a", Embedding({1.0, 0.0}));
    store.add("b", Embedding({0.0, 1.0}));
    store.add("a'", Embedding({0.95, std::sqrt(1.0 - 0.95 * 0.95)}));
    HitOracle oracle;
    oracle.add("a", "a'");
    const std::vector<std::string> stream{"a", "b", "a'"};
    const auto r = simulate(stream, store, nullptr, 0.9, oracle, 1);
    bool ok = r.n_correct_hit == 1 && r.n_false_hit == 0 && r.n_miss == 2 && r.efficiency() == 1.0;

    Rng rng(1006);
    for (int t = 0; t < 50 && ok; ++t) {
        EmbeddingStore s;
        PairDataset ds;
        const std::size_t n = 10 + rng.below(40);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string x = "x" + std::to_string(i), y = "y" + std::to_string(i);
            s.add(x, oracles::random_embedding(rng, 3));
            s.add(y, oracles::random_embedding(rng, 3));
            ds.add_prompt({x, x});
            ds.add_prompt({y, y});
            ds.add_pair({x, y, static_cast<double>(i % 2), std::nullopt});
        }
        const auto st = build_stream(ds, n / 2, n / 2, rng.next_u64());
        const auto rr = simulate(st.prompts, s, nullptr, rng.uniform(0.3, 0.99), st.oracle,
                                 st.n_expected_hit);
        ok = rr.n_correct_hit + rr.n_false_hit + rr.n_miss == st.prompts.size();
    }
    return {ok, "counts " + std::to_string(r.n_correct_hit) + "/" + std::to_string(r.n_false_hit) +
                    "/" + std::to_string(r.n_miss) + ", efficiency " + fmt("%.3f", r.efficiency())};
}

// 7. Efficiency arithmetic on constructed counters.
Outcome efficiency_arithmetic() {
    SimReport r;
    r.n_correct_hit = 150;
    r.n_false_hit = 15;
    r.n_miss = 835;
    r.n_expected_hit = 250;
    const double e = r.efficiency();
    SimReport neg;
    neg.n_false_hit = 3;
    neg.n_expected_hit = 4;
    const bool ok = std::abs(e - 0.54) <= 1e-15 && fmt("%.1f%%", 100.0 * e) == "54.0%" &&
                    neg.efficiency() == -0.75 && caching_efficiency(0, 0, 7) == 0.0;
    return {ok, "(150-15)/250 = " + fmt("%.1f%%", 100.0 * e)};
}

// 8. The CLI reproduces result files byte for byte.
int run_cli(const std::string& args) {
    const int status = std::system((std::string(PROMPTCACHE_CLI_PATH) + " " + args +
                                    " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome cli_determinism() {
    const fs::path root = fs::temp_directory_path() / ("promptcache_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    const std::string emb = q(root / "world/embeddings.pcemb");
    if (run_cli("plant --d 8 --n-prompts 4000 --seed 8 --out " + q(root / "world")) != 0 ||
        run_cli("split --pairs " + q(root / "world/pairs.jsonl") + " --seed 8 --out " +
                q(root / "split")) != 0) {
        return {false, "could not prepare data"};
    }
    const std::vector<std::pair<std::string, std::string>> commands{
        {"train", "train --train " + q(root / "split/train.jsonl") + " --val " +
                      q(root / "split/val.jsonl") + " --embeddings " + emb + " --epochs 3 --seed 4"},
        {"simulate", "simulate --test-pairs " + q(root / "split/test.jsonl") + " --embeddings " + emb +
                         " --raw --n-pos 100 --n-neg 100 --seed 4"},
        {"synth", "synth --d 4 --n-list 50,100 --eval-pairs 500 --epochs 20 --seed 4"},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, args] : commands) {
        const fs::path a = root / (name + "_1"), b = root / (name + "_2");
        const bool ran = run_cli(args + " --out " + q(a)) == 0 && run_cli(args + " --out " + q(b)) == 0;
        bool same = ran && fs::exists(a / "result.json");
        if (ran) {
            for (const auto& entry : fs::directory_iterator(a)) {
                same = same && slurp(entry.path()) == slurp(b / entry.path().filename());
            }
        }
        ok = ok && same;
        detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
    }
    fs::remove_all(root);
    return {ok, detail};
}

// 9. Expected empirical BCE over an enumerated distribution equals the population loss.
Outcome unbiasedness() {
    Rng rng(1009);
    const auto prob = oracles::random_problem(rng, 3, 8);
    std::vector<double> mass(8), truth(8);
    double total = 0.0;
    for (int i = 0; i < 8; ++i) total += (mass[i] = rng.uniform(0.1, 1.0));
    for (int i = 0; i < 8; ++i) {
        mass[i] /= total;
        truth[i] = rng.uniform(0.02, 0.98);
    }
    std::vector<WeightedPair> dist;
    for (int i = 0; i < 8; ++i) {
        dist.push_back({std::cref(prob.embeddings[2 * i]), std::cref(prob.embeddings[2 * i + 1]),
                        mass[i], truth[i]});
    }
    // All samples of size two: 8 x 8 pair draws times 2 x 2 label outcomes.
    double expectation = 0.0;
    for (int a = 0; a < 8; ++a) {
        for (int la = 0; la < 2; ++la) {
            for (int b = 0; b < 8; ++b) {
                for (int lb = 0; lb < 2; ++lb) {
                    const double w = mass[a] * (la ? truth[a] : 1.0 - truth[a]) * mass[b] *
                                     (lb ? truth[b] : 1.0 - truth[b]);
                    const PairBatch batch({{std::cref(prob.embeddings[2 * a]),
                                            std::cref(prob.embeddings[2 * a + 1]), double(la)},
                                           {std::cref(prob.embeddings[2 * b]),
                                            std::cref(prob.embeddings[2 * b + 1]), double(lb)}});
                    expectation += w * bce_loss(prob.model, batch);
                }
            }
        }
    }
    const double population = expected_bce_loss(prob.model, dist);
    const double gap = std::abs(expectation - population);
    return {gap <= 1e-12, "gap " + fmt("%.2e", gap)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"hard-dataset AUC law", hard_dataset_auc_law},
        {"AUC oracle equivalence", auc_oracle_equivalence},
        {"synthetic convergence", synthetic_convergence},
        {"planted AUC lift", planted_auc_lift},
        {"simulator hand trace", simulator_trace},
        {"efficiency arithmetic", efficiency_arithmetic},
        {"CLI determinism", cli_determinism},
        {"unbiased empirical loss", unbiasedness},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += o.pass ? 0 : 1;
        std::printf("%s %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
