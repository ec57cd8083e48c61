// promptcache command-line entry point.
//
// Every subcommand writes <out>/config.json (the fully resolved settings) and
// <out>/result.json, plus command-specific artifacts. `replay` re-runs a
// recorded config.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "promptcache/dataset.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/errors.hpp"
#include "promptcache/metrics.hpp"
#include "promptcache/model.hpp"
#include "promptcache/simcache.hpp"
#include "promptcache/synth.hpp"
#include "promptcache/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace promptcache;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    write_text(path, os.str());
}

std::string format_fixed(double x, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, x);
    return buf;
}

template <typename T>
T get(const json& cfg, const char* key) {
    if (!cfg.contains(key)) throw UsageError(std::string("config is missing '") + key + "'");
    return cfg.at(key).get<T>();
}

template <typename T>
std::optional<T> get_opt(const json& cfg, const char* key) {
    if (!cfg.contains(key) || cfg.at(key).is_null()) return std::nullopt;
    return cfg.at(key).get<T>();
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("not a number in list: '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("list must be non-empty");
    return out;
}

std::optional<SimilarityModel> load_scorer(const json& cfg) {
    const auto ckpt = get_opt<std::string>(cfg, "checkpoint");
    if (ckpt) return load_checkpoint(fs::path(*ckpt));
    return std::nullopt;
}

// ---- subcommands -----------------------------------------------------------

json run_mine(const json& cfg, const fs::path& out) {
    const auto prompts = read_prompts(fs::path(get<std::string>(cfg, "prompts")));
    const auto store = read_embeddings(fs::path(get<std::string>(cfg, "embeddings")));
    MineOptions opts;
    opts.k = get<std::size_t>(cfg, "k");
    opts.sample = get_opt<std::size_t>(cfg, "sample");
    opts.seed = get<std::uint64_t>(cfg, "seed");
    const auto unique = dedupe_prompts(prompts);
    const auto candidates = mine_pairs(unique, store, opts);

    std::optional<PairDataset> labels;
    if (auto path = get_opt<std::string>(cfg, "labels")) labels = read_pairs(fs::path(*path));
    std::map<std::pair<std::string, std::string>, double> label_of;
    if (labels) {
        for (const auto& p : labels->pairs()) {
            label_of[std::minmax(p.first_id, p.second_id)] = p.label;
        }
    }
    std::map<std::string, std::string> text_of;
    for (const auto& p : unique) text_of[p.id] = p.text;

    std::ostringstream os;
    std::size_t n_labeled = 0;
    for (const auto& c : candidates) {
        json rec;
        rec["id1"] = c.first_id;
        rec["id2"] = c.second_id;
        rec["q1"] = text_of.at(c.first_id);
        rec["q2"] = text_of.at(c.second_id);
        rec["sim"] = c.similarity;
        if (labels) {
            const auto it = label_of.find(std::minmax(c.first_id, c.second_id));
            if (it == label_of.end()) continue;  // no offline label for this candidate
            rec["label"] = it->second;
            ++n_labeled;
        }
        os << rec.dump() << '\n';
    }
    write_text(out / "pairs.jsonl", os.str());
    json result;
    result["n_prompts"] = prompts.size();
    result["n_unique_prompts"] = unique.size();
    result["n_candidates"] = candidates.size();
    result["n_labeled"] = labels ? json(n_labeled) : json(nullptr);
    std::cout << "mined " << candidates.size() << " candidate pairs from " << unique.size()
              << " prompts\n";
    return result;
}

json run_build_hard(const json& cfg, const fs::path& out) {
    const auto labeled = read_pairs(fs::path(get<std::string>(cfg, "pairs")));
    const auto store = read_embeddings(fs::path(get<std::string>(cfg, "embeddings")));
    const auto hard = build_hard_dataset(labeled, store);
    write_pairs(hard, out / "pairs.jsonl");

    json result;
    result["n_input"] = labeled.size();
    result["n_output"] = hard.size();
    std::vector<double> sims, labels;
    for (const auto& p : hard.pairs()) {
        sims.push_back(*p.similarity);
        labels.push_back(p.label);
    }
    const bool two_classes = hard.size() >= 2;
    result["base_auc"] =
        two_classes ? json(roc_auc_thresholded(sims, labels).auc) : json(nullptr);
    std::cout << "hard dataset: kept " << hard.size() << " of " << labeled.size() << " pairs\n";
    return result;
}

json run_split(const json& cfg, const fs::path& out) {
    const auto ds = read_pairs(fs::path(get<std::string>(cfg, "pairs")));
    SplitRatios ratios{get<double>(cfg, "train_ratio"), get<double>(cfg, "val_ratio"),
                       get<double>(cfg, "test_ratio")};
    const auto parts = split(ds, ratios, get<std::uint64_t>(cfg, "seed"));
    write_pairs(parts.train, out / "train.jsonl");
    write_pairs(parts.val, out / "val.jsonl");
    write_pairs(parts.test, out / "test.jsonl");
    json result;
    result["n_total"] = ds.size();
    result["n_train"] = parts.train.size();
    result["n_val"] = parts.val.size();
    result["n_test"] = parts.test.size();
    std::cout << "split " << ds.size() << " pairs into " << parts.train.size() << "/"
              << parts.val.size() << "/" << parts.test.size() << "\n";
    return result;
}

TrainConfig train_config_from(const json& cfg) {
    TrainConfig tc = TrainConfig::defaults_for(parse_loss_type(get<std::string>(cfg, "loss")));
    tc.learning_rate = get<double>(cfg, "lr");
    tc.epochs = get<std::size_t>(cfg, "epochs");
    tc.batch_size = get<std::size_t>(cfg, "batch");
    tc.calibration = {get<double>(cfg, "lambda"), get<double>(cfg, "c")};
    tc.joint = get<bool>(cfg, "joint");
    tc.seed = get<std::uint64_t>(cfg, "seed");
    tc.weight_decay = get<double>(cfg, "weight_decay");
    const auto min_lambda = get_opt<double>(cfg, "min_lambda");
    const auto max_abs_c = get_opt<double>(cfg, "max_abs_c");
    if (min_lambda || max_abs_c) {
        ParamBounds b;
        if (min_lambda) b.min_lambda = *min_lambda;
        if (max_abs_c) b.max_abs_c = *max_abs_c;
        tc.bounds = b;
    }
    tc.validate();
    return tc;
}

json run_train(const json& cfg, const fs::path& out) {
    const TrainConfig tc = train_config_from(cfg);
    const auto store = read_embeddings(fs::path(get<std::string>(cfg, "embeddings")));
    const auto train_set = read_pairs(fs::path(get<std::string>(cfg, "train")));
    PairDataset val_set, test_set;
    if (auto p = get_opt<std::string>(cfg, "val")) val_set = read_pairs(fs::path(*p));
    if (auto p = get_opt<std::string>(cfg, "test")) test_set = read_pairs(fs::path(*p));

    const TrainReport rep = train(store, train_set, val_set, tc);
    save_checkpoint(rep.model, out / "model.ckpt");

    json result;
    result["loss"] = to_string(tc.loss);
    result["n_train"] = train_set.size();
    result["n_val"] = val_set.size();
    result["n_test"] = test_set.size();
    json losses = json::array(), aucs = json::array();
    for (double l : rep.train_loss) losses.push_back(l);
    for (double a : rep.val_auc) aucs.push_back(number_or_null(a));
    result["train_loss"] = losses;
    result["val_auc"] = aucs;
    result["initial_val_auc"] = number_or_null(rep.initial_val_auc);
    result["final_val_auc"] = number_or_null(rep.val_auc.back());
    const SimilarityModel initial(store.dim(), tc.calibration);
    result["initial_test_auc"] = number_or_null(evaluate_auc(initial, store, test_set));
    result["final_test_auc"] = number_or_null(evaluate_auc(rep.model, store, test_set));
    result["lambda"] = rep.model.calibration().lambda;
    result["c"] = rep.model.calibration().c;

    const PairDataset& roc_set = val_set.empty() ? test_set : val_set;
    if (!roc_set.empty() && std::isfinite(evaluate_auc(rep.model, store, roc_set))) {
        const auto items = roc_set.embed(store);
        std::vector<double> labels;
        for (const auto& it : items) labels.push_back(it.label);
        const auto roc = roc_auc_thresholded(score_pairs(rep.model, items), labels);
        write_stream(out / "roc.csv", [&](std::ostream& os) { write_roc_csv(roc, os); });
    }
    std::cout << "trained " << to_string(tc.loss) << " for " << tc.epochs << " epochs; val AUC "
              << (std::isfinite(rep.initial_val_auc) ? format_auc(rep.initial_val_auc) : "n/a")
              << " -> "
              << (std::isfinite(rep.val_auc.back()) ? format_auc(rep.val_auc.back()) : "n/a")
              << "\n";
    return result;
}

json run_eval(const json& cfg, const fs::path& out) {
    const auto store = read_embeddings(fs::path(get<std::string>(cfg, "embeddings")));
    const auto ds = read_pairs(fs::path(get<std::string>(cfg, "pairs")));
    const auto scorer = load_scorer(cfg);
    const SimilarityModel model = scorer ? *scorer : SimilarityModel(store.dim(), {});
    const auto items = ds.embed(store);
    std::vector<double> labels;
    for (const auto& it : items) labels.push_back(it.label);
    const auto roc = roc_auc_thresholded(score_pairs(model, items), labels);
    const fs::path roc_path = get_opt<std::string>(cfg, "roc_out")
                                  ? fs::path(*get_opt<std::string>(cfg, "roc_out"))
                                  : out / "roc.csv";
    write_stream(roc_path, [&](std::ostream& os) { write_roc_csv(roc, os); });
    json result;
    result["scorer"] = scorer ? "checkpoint" : "raw";
    result["n_pairs"] = ds.size();
    result["auc"] = roc.auc;
    std::cout << "AUC " << format_auc(roc.auc) << " on " << ds.size() << " pairs\n";
    return result;
}

json report_json(const SimReport& r) {
    json doc;
    doc["tau"] = r.tau;
    doc["nCorrectHit"] = r.n_correct_hit;
    doc["nFalseHit"] = r.n_false_hit;
    doc["nMiss"] = r.n_miss;
    doc["nExpectedHit"] = r.n_expected_hit;
    doc["efficiency"] = r.efficiency();
    json events = json::array();
    for (const auto& e : r.events) {
        json ev;
        ev["prompt"] = e.prompt_id;
        ev["decision"] = to_string(e.decision);
        ev["matched"] = e.matched_id ? json(*e.matched_id) : json(nullptr);
        ev["similarity"] = e.similarity ? json(*e.similarity) : json(nullptr);
        ev["verdict"] = e.verdict ? json(*e.verdict) : json(nullptr);
        events.push_back(std::move(ev));
    }
    doc["events"] = std::move(events);
    return doc;
}

struct StreamSetup {
    EmbeddingStore store;
    std::optional<SimilarityModel> scorer;
    SimStream stream;
};

StreamSetup stream_setup(const json& cfg) {
    StreamSetup s;
    s.scorer = load_scorer(cfg);
    s.store = read_embeddings(fs::path(get<std::string>(cfg, "embeddings")));
    const auto test = read_pairs(fs::path(get<std::string>(cfg, "test_pairs")));
    s.stream = build_stream(test, get<std::size_t>(cfg, "n_pos"), get<std::size_t>(cfg, "n_neg"),
                            get<std::uint64_t>(cfg, "seed"));
    return s;
}

json run_simulate(const json& cfg, const fs::path&) {
    const double tau = get<double>(cfg, "tau");
    if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("--tau must lie in [0, 1]");
    const auto s = stream_setup(cfg);
    const SimReport r = simulate(s.stream.prompts, s.store, s.scorer ? &*s.scorer : nullptr, tau,
                                 s.stream.oracle, s.stream.n_expected_hit);
    std::cout << "efficiency " << format_fixed(100.0 * r.efficiency(), "%.1f") << "% (correct "
              << r.n_correct_hit << ", false " << r.n_false_hit << ", miss " << r.n_miss
              << ", expected " << r.n_expected_hit << ")\n";
    return report_json(r);
}

json run_sweep(const json& cfg, const fs::path& out) {
    const auto taus = get<std::vector<double>>(cfg, "tau_list");
    for (double t : taus) {
        if (!(t >= 0.0 && t <= 1.0)) throw UsageError("every tau must lie in [0, 1]");
    }
    const auto s = stream_setup(cfg);
    const SweepResult sw =
        sweep_thresholds(s.stream.prompts, s.store, s.scorer ? &*s.scorer : nullptr, taus,
                         s.stream.oracle, s.stream.n_expected_hit);
    write_stream(out / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(sw, os); });
    json rows = json::array();
    for (const auto& r : sw.rows) {
        rows.push_back({{"tau", r.tau},
                        {"efficiency", r.efficiency},
                        {"nCorrectHit", r.n_correct_hit},
                        {"nFalseHit", r.n_false_hit},
                        {"nMiss", r.n_miss}});
    }
    json result;
    result["nExpectedHit"] = s.stream.n_expected_hit;
    result["rows"] = rows;
    result["best_tau"] = sw.rows[sw.best].tau;
    result["best_efficiency"] = sw.rows[sw.best].efficiency;
    for (const auto& r : sw.rows) {
        std::cout << "tau " << format_fixed(r.tau, "%.4g") << "  efficiency "
                  << format_fixed(100.0 * r.efficiency, "%.1f") << "%\n";
    }
    return result;
}

json run_synth(const json& cfg, const fs::path& out) {
    const LossType loss = parse_loss_type(get<std::string>(cfg, "loss"));
    const auto n_list = get<std::vector<std::size_t>>(cfg, "n_list");
    const std::string label_mode = get<std::string>(cfg, "labels");
    if (label_mode != "exact" && label_mode != "bernoulli") {
        throw UsageError("--labels must be exact or bernoulli");
    }
    WorldOptions wo;
    wo.labels = label_mode == "exact" ? LabelMode::kExact : LabelMode::kBernoulli;
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed");

    TrainConfig tc;
    tc.loss = loss;
    tc.learning_rate = get<double>(cfg, "lr");
    tc.epochs = get<std::size_t>(cfg, "epochs");
    const std::size_t batch = get<std::size_t>(cfg, "batch");
    tc.batch_size = batch == 0 ? n_list.empty() ? 1 : n_list.back() : batch;
    tc.calibration = {get<double>(cfg, "lambda"), get<double>(cfg, "c")};
    tc.weight_decay = get<double>(cfg, "weight_decay");
    tc.seed = seed;
    tc.joint = true;

    const auto world = make_world(get<std::size_t>(cfg, "d"), seed, wo);
    const auto rows = convergence_experiment(world, n_list, tc,
                                             {get<std::size_t>(cfg, "eval_pairs"), seed});
    write_stream(out / "convergence.csv",
                 [&](std::ostream& os) { write_convergence_csv(rows, os); });
    json result;
    result["loss"] = to_string(loss);
    result["labels"] = label_mode;
    json jr = json::array();
    for (const auto& r : rows) {
        jr.push_back({{"N", r.n}, {"mean_abs_error", r.mean_abs_error}});
        std::cout << "N=" << r.n << "  mean |P - P*| = " << format_fixed(r.mean_abs_error, "%.4f")
                  << "\n";
    }
    result["rows"] = jr;
    return result;
}

json run_plant(const json& cfg, const fs::path& out) {
    PlantOptions po;
    po.signal_share = get<double>(cfg, "signal_share");
    po.rotate = get<bool>(cfg, "rotate");
    const auto world = plant_hard_world(get<std::size_t>(cfg, "d"),
                                        get<std::size_t>(cfg, "n_prompts"),
                                        get<std::uint64_t>(cfg, "seed"), po);
    write_prompts(world.prompts, out / "prompts.jsonl");
    write_embeddings(world.embeddings, out / "embeddings.pcemb");
    write_pairs(world.dataset, out / "pairs.jsonl");
    save_checkpoint(SimilarityModel(world.plant, {}), out / "plant.ckpt");
    json result;
    result["n_prompts"] = world.prompts.size();
    result["n_pairs"] = world.dataset.size();
    result["base_auc"] = world.base_auc;
    result["plant_auc"] = world.plant_auc;
    std::cout << "planted world: base AUC " << format_auc(world.base_auc) << ", planted AUC "
              << format_auc(world.plant_auc) << "\n";
    return result;
}

json run_command(const std::string& command, const json& cfg, const fs::path& out) {
    if (command == "mine") return run_mine(cfg, out);
    if (command == "build-hard") return run_build_hard(cfg, out);
    if (command == "split") return run_split(cfg, out);
    if (command == "train") return run_train(cfg, out);
    if (command == "eval") return run_eval(cfg, out);
    if (command == "simulate") return run_simulate(cfg, out);
    if (command == "sweep") return run_sweep(cfg, out);
    if (command == "synth") return run_synth(cfg, out);
    if (command == "plant") return run_plant(cfg, out);
    throw UsageError("unknown command '" + command + "'");
}

void execute(const std::string& command, const json& cfg, const fs::path& out) {
    fs::create_directories(out);
    json doc;
    doc["command"] = command;
    doc["args"] = cfg;
    write_json(out / "config.json", doc);
    write_json(out / "result.json", run_command(command, cfg, out));
}

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedding-similarity prompt caching toolkit"};
    app.require_subcommand(1);

    std::string out_dir;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--out,--out-dir", out_dir, "Output directory")->required();
        if (with_seed) {
            sub->add_option("--seed", seed, "Random seed")->envname("PROMPTCACHE_SEED");
        }
    };

    // Data inputs shared by several commands.
    std::string prompts_path, embeddings_path, pairs_path, labels_path;
    std::string train_path, val_path, test_path, checkpoint_path, roc_out;

    auto* mine = app.add_subcommand("mine", "Mine nearest-neighbor candidate pairs");
    std::size_t k = 3;
    std::size_t sample = 0;
    mine->add_option("--prompts", prompts_path, "Prompt table (JSONL)")->required();
    mine->add_option("--embeddings", embeddings_path, "Embedding file")->required();
    mine->add_option("--k", k, "Neighbors per prompt")->capture_default_str();
    auto* sample_opt = mine->add_option("--sample", sample, "Number of query prompts to sample");
    mine->add_option("--labels", labels_path, "Labeled pairs to attach offline labels from");
    add_common(mine, true);

    auto* hard = app.add_subcommand("build-hard", "Select the alternating-label hard dataset");
    hard->add_option("--pairs", pairs_path, "Labeled pairs (JSONL)")->required();
    hard->add_option("--embeddings", embeddings_path, "Embedding file")->required();
    add_common(hard, false);

    auto* split_cmd = app.add_subcommand("split", "Seeded train/val/test split");
    SplitRatios ratios;
    split_cmd->add_option("--pairs", pairs_path, "Labeled pairs (JSONL)")->required();
    split_cmd->add_option("--train-ratio", ratios.train)->capture_default_str();
    split_cmd->add_option("--val-ratio", ratios.val)->capture_default_str();
    split_cmd->add_option("--test-ratio", ratios.test)->capture_default_str();
    add_common(split_cmd, true);

    auto* train_cmd = app.add_subcommand("train", "Fine-tune the projection head");
    std::string loss = "bce";
    double lr = 1e-5, lambda = 0.01, weight_decay = 0.01;
    std::optional<double> c_opt, min_lambda, max_abs_c;
    std::size_t epochs = 20, batch = 16;
    bool joint = false;
    train_cmd->add_option("--train", train_path, "Training pairs")->required();
    train_cmd->add_option("--val", val_path, "Validation pairs");
    train_cmd->add_option("--test", test_path, "Test pairs");
    train_cmd->add_option("--embeddings", embeddings_path, "Embedding file")->required();
    train_cmd->add_option("--loss", loss, "bce or sld")->capture_default_str();
    train_cmd->add_option("--lambda", lambda)->capture_default_str();
    train_cmd->add_option("--c", c_opt, "Offset (default 88 for bce, 90 for sld)");
    train_cmd->add_option("--lr", lr)->capture_default_str();
    train_cmd->add_option("--epochs", epochs)->capture_default_str();
    train_cmd->add_option("--batch", batch)->capture_default_str();
    train_cmd->add_option("--weight-decay", weight_decay)->capture_default_str();
    train_cmd->add_flag("--joint", joint, "Also optimize lambda and c");
    train_cmd->add_option("--min-lambda", min_lambda, "Lower bound on lambda (joint mode)");
    train_cmd->add_option("--max-abs-c", max_abs_c, "Bound on |c| (joint mode)");
    add_common(train_cmd, true);

    bool raw = false;
    auto add_scorer = [&](CLI::App* sub) {
        auto* ck = sub->add_option("--checkpoint", checkpoint_path, "Trained model checkpoint");
        auto* rw = sub->add_flag("--raw", raw, "Score with raw base-embedding similarity");
        ck->excludes(rw);
        rw->excludes(ck);
        sub->callback([ck, rw] {
            if (ck->count() == 0 && rw->count() == 0) {
                throw CLI::ValidationError("exactly one of --checkpoint or --raw is required");
            }
        });
    };

    auto* eval_cmd = app.add_subcommand("eval", "ROC/AUC of a scorer on labeled pairs");
    eval_cmd->add_option("--pairs", pairs_path, "Labeled pairs")->required();
    eval_cmd->add_option("--embeddings", embeddings_path, "Embedding file")->required();
    eval_cmd->add_option("--roc-out", roc_out, "ROC CSV path (default <out>/roc.csv)");
    add_scorer(eval_cmd);
    add_common(eval_cmd, false);

    std::size_t n_pos = 250, n_neg = 250;
    double tau = 0.9;
    std::string tau_list;
    auto add_stream = [&](CLI::App* sub) {
        sub->add_option("--test-pairs", test_path, "Labeled test pairs")->required();
        sub->add_option("--embeddings", embeddings_path, "Embedding file")->required();
        sub->add_option("--n-pos", n_pos, "Label-1 pairs in the stream")->capture_default_str();
        sub->add_option("--n-neg", n_neg, "Label-0 pairs in the stream")->capture_default_str();
        add_scorer(sub);
        add_common(sub, true);
    };
    auto* sim_cmd = app.add_subcommand("simulate", "Stream prompts through a cache");
    sim_cmd->add_option("--tau", tau, "Hit threshold")->capture_default_str();
    add_stream(sim_cmd);
    auto* sweep_cmd = app.add_subcommand("sweep", "Efficiency over a threshold grid");
    sweep_cmd->add_option("--tau-list", tau_list, "Comma-separated thresholds (default 0.88..0.94)");
    add_stream(sweep_cmd);

    auto* synth_cmd = app.add_subcommand("synth", "Convergence experiment on a synthetic world");
    std::size_t d = 16, eval_pairs = 10000, synth_epochs = 1000, synth_batch = 0;
    std::string n_list = "250,1000,4000", synth_loss = "bce", synth_labels;
    double synth_lr = 0.01, synth_lambda = 0.1, synth_c = 0.0, synth_wd = 0.0;
    synth_cmd->add_option("--d", d)->capture_default_str();
    synth_cmd->add_option("--n-list", n_list)->capture_default_str();
    synth_cmd->add_option("--loss", synth_loss)->capture_default_str();
    synth_cmd->add_option("--labels", synth_labels, "exact or bernoulli (default: bernoulli for bce, exact for sld)");
    synth_cmd->add_option("--eval-pairs", eval_pairs)->capture_default_str();
    synth_cmd->add_option("--lr", synth_lr)->capture_default_str();
    synth_cmd->add_option("--epochs", synth_epochs)->capture_default_str();
    synth_cmd->add_option("--batch", synth_batch, "Minibatch size, 0 for full batch")->capture_default_str();
    synth_cmd->add_option("--lambda", synth_lambda, "Initial lambda")->capture_default_str();
    synth_cmd->add_option("--c", synth_c, "Initial c")->capture_default_str();
    synth_cmd->add_option("--weight-decay", synth_wd)->capture_default_str();
    add_common(synth_cmd, true);

    auto* plant_cmd = app.add_subcommand("plant", "Write a synthetic hard world to disk");
    std::size_t n_prompts = 40000;
    double signal_share = 0.05;
    bool no_rotate = false;
    plant_cmd->add_option("--d", d)->capture_default_str();
    plant_cmd->add_option("--n-prompts", n_prompts)->capture_default_str();
    plant_cmd->add_option("--signal-share", signal_share)->capture_default_str();
    plant_cmd->add_flag("--no-rotate", no_rotate, "Keep the planted subspace axis-aligned");
    add_common(plant_cmd, true);

    auto* replay = app.add_subcommand("replay", "Re-run a recorded config.json");
    std::string config_path;
    replay->add_option("--config", config_path, "config.json of an earlier run")->required();
    add_common(replay, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    auto opt_path = [](const std::string& s) {
        return s.empty() ? std::optional<std::string>{} : std::optional<std::string>{s};
    };

    try {
        std::string command;
        json cfg;
        if (*mine) {
            command = "mine";
            cfg = {{"prompts", prompts_path}, {"embeddings", embeddings_path}, {"k", k},
                   {"sample", sample_opt->count() ? json(sample) : json(nullptr)},
                   {"labels", opt_json(opt_path(labels_path))}, {"seed", seed}};
        } else if (*hard) {
            command = "build-hard";
            cfg = {{"pairs", pairs_path}, {"embeddings", embeddings_path}};
        } else if (*split_cmd) {
            command = "split";
            cfg = {{"pairs", pairs_path}, {"train_ratio", ratios.train},
                   {"val_ratio", ratios.val}, {"test_ratio", ratios.test}, {"seed", seed}};
        } else if (*train_cmd) {
            command = "train";
            const LossType lt = parse_loss_type(loss);
            cfg = {{"train", train_path}, {"val", opt_json(opt_path(val_path))},
                   {"test", opt_json(opt_path(test_path))}, {"embeddings", embeddings_path},
                   {"loss", std::string(to_string(lt))}, {"lambda", lambda},
                   {"c", c_opt ? *c_opt : TrainConfig::defaults_for(lt).calibration.c},
                   {"lr", lr}, {"epochs", epochs}, {"batch", batch},
                   {"weight_decay", weight_decay}, {"joint", joint},
                   {"min_lambda", min_lambda ? json(*min_lambda) : json(nullptr)},
                   {"max_abs_c", max_abs_c ? json(*max_abs_c) : json(nullptr)},
                   {"seed", seed}};
            (void)train_config_from(cfg);  // reject bad settings before reading data
        } else if (*eval_cmd) {
            command = "eval";
            cfg = {{"pairs", pairs_path}, {"embeddings", embeddings_path},
                   {"checkpoint", opt_json(opt_path(checkpoint_path))},
                   {"roc_out", opt_json(opt_path(roc_out))}};
        } else if (*sim_cmd || *sweep_cmd) {
            command = *sim_cmd ? "simulate" : "sweep";
            cfg = {{"test_pairs", test_path}, {"embeddings", embeddings_path},
                   {"checkpoint", opt_json(opt_path(checkpoint_path))},
                   {"n_pos", n_pos}, {"n_neg", n_neg}, {"seed", seed}};
            if (*sim_cmd) {
                cfg["tau"] = tau;
            } else {
                cfg["tau_list"] = tau_list.empty() ? default_tau_grid() : parse_double_list(tau_list);
            }
        } else if (*synth_cmd) {
            command = "synth";
            const LossType lt = parse_loss_type(synth_loss);
            std::vector<std::size_t> ns;
            for (double v : parse_double_list(n_list)) {
                if (!(v >= 1.0) || v != std::floor(v)) throw UsageError("--n-list needs positive integers");
                ns.push_back(static_cast<std::size_t>(v));
            }
            cfg = {{"d", d}, {"n_list", ns}, {"loss", std::string(to_string(lt))},
                   {"labels", synth_labels.empty()
                                  ? std::string(lt == LossType::kBce ? "bernoulli" : "exact")
                                  : synth_labels},
                   {"eval_pairs", eval_pairs}, {"lr", synth_lr}, {"epochs", synth_epochs},
                   {"batch", synth_batch}, {"lambda", synth_lambda}, {"c", synth_c},
                   {"weight_decay", synth_wd}, {"seed", seed}};
        } else if (*plant_cmd) {
            command = "plant";
            cfg = {{"d", d}, {"n_prompts", n_prompts}, {"signal_share", signal_share},
                   {"rotate", !no_rotate}, {"seed", seed}};
        } else if (*replay) {
            std::ifstream in(config_path);
            if (!in) throw DataError("cannot open " + config_path);
            const json doc = json::parse(in);
            command = get<std::string>(doc, "command");
            cfg = doc.at("args");
        }
        execute(command, cfg, fs::path(out_dir));
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NotImplementedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
}
