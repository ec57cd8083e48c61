#include "promptcache/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "json.hpp"
#include "promptcache/errors.hpp"
#include "promptcache/index.hpp"
#include "promptcache/rng.hpp"

namespace promptcache {

using Json = nlohmann::ordered_json;

namespace {

std::pair<std::string, std::string> unordered_key(const std::string& a, const std::string& b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

void PairDataset::add_prompt(Prompt prompt) {
    prompt.validate();
    auto it = prompts_.find(prompt.id);
    if (it != prompts_.end()) {
        if (it->second.text != prompt.text) {
            throw DataError("prompt id '" + prompt.id + "' is bound to two different texts");
        }
        return;
    }
    prompts_.emplace(prompt.id, std::move(prompt));
}

void PairDataset::add_pair(LabeledPair pair) {
    if (pair.first_id == pair.second_id) {
        throw DataError("pair joins prompt '" + pair.first_id + "' with itself");
    }
    if (!prompts_.contains(pair.first_id) || !prompts_.contains(pair.second_id)) {
        throw DataError("pair references an unknown prompt id ('" + pair.first_id + "', '" +
                        pair.second_id + "')");
    }
    if (!std::isfinite(pair.label) || pair.label < 0.0 || pair.label > 1.0) {
        throw DataError("label outside [0, 1]");
    }
    if (pair.similarity && !std::isfinite(*pair.similarity)) {
        throw DataError("non-finite cached similarity");
    }
    if (!seen_.insert(unordered_key(pair.first_id, pair.second_id)).second) {
        throw DataError("duplicate pair ('" + pair.first_id + "', '" + pair.second_id + "')");
    }
    pairs_.push_back(std::move(pair));
}

const Prompt& PairDataset::prompt(const std::string& id) const {
    auto it = prompts_.find(id);
    if (it == prompts_.end()) throw DataError("unknown prompt id '" + id + "'");
    return it->second;
}

PairDataset PairDataset::subset(std::span<const std::size_t> positions) const {
    PairDataset out;
    for (std::size_t pos : positions) {
        const auto& p = pairs_.at(pos);
        out.add_prompt(prompt(p.first_id));
        out.add_prompt(prompt(p.second_id));
        out.add_pair(p);
    }
    return out;
}

void PairDataset::clip_labels(double lo, double hi) {
    for (auto& p : pairs_) p.label = clip(p.label, lo, hi);
}

std::vector<PairItem> PairDataset::embed(const EmbeddingStore& store) const {
    std::vector<PairItem> items;
    items.reserve(pairs_.size());
    for (const auto& p : pairs_) {
        items.push_back({std::cref(store.at(p.first_id)), std::cref(store.at(p.second_id)), p.label});
    }
    return items;
}

namespace {

std::string required_string(const Json& rec, const char* key) {
    auto it = rec.find(key);
    if (it == rec.end()) throw DataError(std::string("missing required field '") + key + "'");
    if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

double required_number(const Json& rec, const char* key) {
    auto it = rec.find(key);
    if (it == rec.end()) throw DataError(std::string("missing required field '") + key + "'");
    if (!it->is_number()) throw DataError(std::string("field '") + key + "' must be a number");
    return it->get<double>();
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            Json rec = Json::parse(line);
            if (!rec.is_object()) throw DataError("record is not a JSON object");
            fn(rec);
        } catch (const Json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void write_json_line(std::ostream& out, const Json& rec) {
    out << rec.dump(-1, ' ', false, Json::error_handler_t::strict) << '\n';
}

}  // namespace

PairDataset read_pairs(std::istream& in) {
    PairDataset ds;
    for_each_json_line(in, [&](const Json& rec) {
        const std::string q1 = required_string(rec, "q1");
        const std::string q2 = required_string(rec, "q2");
        const double label = required_number(rec, "label");
        if (!(label >= 0.0 && label <= 1.0)) {
            throw DataError("label " + Json(label).dump() + " is outside [0, 1]");
        }
        LabeledPair pair;
        pair.first_id = rec.contains("id1") ? required_string(rec, "id1") : q1;
        pair.second_id = rec.contains("id2") ? required_string(rec, "id2") : q2;
        pair.label = label;
        if (rec.contains("sim") && !rec["sim"].is_null()) pair.similarity = required_number(rec, "sim");
        ds.add_prompt({pair.first_id, q1});
        ds.add_prompt({pair.second_id, q2});
        ds.add_pair(std::move(pair));
    });
    return ds;
}

PairDataset read_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pairs file " + path.string());
    try {
        return read_pairs(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_pairs(const PairDataset& dataset, std::ostream& out) {
    for (const auto& p : dataset.pairs()) {
        Json rec;
        rec["id1"] = p.first_id;
        rec["id2"] = p.second_id;
        rec["q1"] = dataset.prompt(p.first_id).text;
        rec["q2"] = dataset.prompt(p.second_id).text;
        rec["label"] = p.label;
        if (p.similarity) rec["sim"] = *p.similarity;
        write_json_line(out, rec);
    }
}

void write_pairs(const PairDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write pairs file " + path.string());
    write_pairs(dataset, out);
}

std::vector<Prompt> read_prompts(std::istream& in) {
    std::vector<Prompt> prompts;
    std::unordered_set<std::string> ids;
    for_each_json_line(in, [&](const Json& rec) {
        Prompt p{required_string(rec, "id"), required_string(rec, "text")};
        p.validate();
        if (!ids.insert(p.id).second) throw DataError("duplicate prompt id '" + p.id + "'");
        prompts.push_back(std::move(p));
    });
    return prompts;
}

std::vector<Prompt> read_prompts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open prompt file " + path.string());
    try {
        return read_prompts(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_prompts(std::span<const Prompt> prompts, std::ostream& out) {
    for (const auto& p : prompts) {
        Json rec;
        rec["id"] = p.id;
        rec["text"] = p.text;
        write_json_line(out, rec);
    }
}

void write_prompts(std::span<const Prompt> prompts, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write prompt file " + path.string());
    write_prompts(prompts, out);
}

std::vector<Prompt> dedupe_prompts(std::span<const Prompt> prompts) {
    std::vector<Prompt> out;
    std::unordered_set<std::string> ids, texts;
    for (const auto& p : prompts) {
        p.validate();
        if (!ids.insert(p.id).second) throw DataError("duplicate prompt id '" + p.id + "'");
        if (texts.insert(p.text).second) out.push_back(p);
    }
    return out;
}

std::vector<CandidatePair> mine_pairs(std::span<const Prompt> prompts,
                                      const EmbeddingStore& embeddings,
                                      const MineOptions& options) {
    if (options.k == 0) throw DataError("k must be positive");
    if (options.k >= prompts.size()) {
        throw DataError("k = " + std::to_string(options.k) + " needs more than " +
                        std::to_string(prompts.size()) + " prompts");
    }
    VectorIndex index(embeddings.at(prompts.front().id).dim());
    for (const auto& p : prompts) index.insert(p.id, embeddings.at(p.id));

    std::vector<std::size_t> queries(prompts.size());
    std::iota(queries.begin(), queries.end(), 0);
    if (options.sample && *options.sample < prompts.size()) {
        Rng rng(options.seed);
        rng.shuffle(std::span<std::size_t>(queries));
        queries.resize(*options.sample);
        std::sort(queries.begin(), queries.end());
    }

    std::vector<CandidatePair> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t q : queries) {
        const auto& query = prompts[q];
        // One extra neighbor so the query itself can be dropped.
        auto hits = index.nearest(embeddings.at(query.id), options.k + 1);
        std::size_t taken = 0;
        for (const auto& hit : hits) {
            if (taken == options.k) break;
            if (hit.id == query.id) continue;
            ++taken;
            if (seen.insert(unordered_key(query.id, hit.id)).second) {
                out.push_back({query.id, hit.id, hit.similarity});
            }
        }
    }
    return out;
}

PairDataset build_hard_dataset(const PairDataset& labeled, const EmbeddingStore& embeddings) {
    struct Row {
        double sim;
        std::size_t pos;
    };
    const auto& pairs = labeled.pairs();
    std::vector<Row> rows;
    rows.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (p.label != 0.0 && p.label != 1.0) {
            throw DataError("hard-dataset construction needs binary labels; pair " +
                            std::to_string(i) + " has " + Json(p.label).dump());
        }
        double sim;
        if (embeddings.contains(p.first_id) && embeddings.contains(p.second_id)) {
            sim = cosine_similarity(embeddings.at(p.first_id), embeddings.at(p.second_id));
        } else if (p.similarity) {
            sim = *p.similarity;
        } else {
            throw DataError("no embedding or cached similarity for pair " + std::to_string(i));
        }
        rows.push_back({sim, i});
    }
    std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
        if (a.sim != b.sim) return a.sim < b.sim;
        const auto& pa = pairs[a.pos];
        const auto& pb = pairs[b.pos];
        if (pa.first_id != pb.first_id) return pa.first_id < pb.first_id;
        return pa.second_id < pb.second_id;
    });

    PairDataset out;
    double last_label = 1.0;
    for (const auto& row : rows) {
        const auto& p = pairs[row.pos];
        if (p.label == last_label) continue;
        out.add_prompt(labeled.prompt(p.first_id));
        out.add_prompt(labeled.prompt(p.second_id));
        LabeledPair kept = p;
        kept.similarity = row.sim;
        out.add_pair(std::move(kept));
        last_label = p.label;
    }
    return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
    for (double r : {ratios.train, ratios.val, ratios.test}) {
        if (!std::isfinite(r) || !(r > 0.0)) throw UsageError("split ratios must be positive");
    }
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw UsageError("split ratios must sum to 1");
    }
    // The small offset absorbs representation error such as 0.7 * 10 = 6.999...
    const auto slice = [n](double r) {
        return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
    };
    const std::size_t n_train = slice(ratios.train);
    const std::size_t n_val = slice(ratios.val);
    return {n_train, n_val, n - n_train - n_val};
}

DatasetSplit split(const PairDataset& dataset, const SplitRatios& ratios, std::uint64_t seed) {
    if (dataset.size() < 3) throw DataError("cannot split a dataset of fewer than 3 pairs");
    const auto sizes = split_sizes(dataset.size(), ratios);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    const std::span<const std::size_t> all(order);
    return {dataset.subset(all.subspan(0, sizes[0])), dataset.subset(all.subspan(sizes[0], sizes[1])),
            dataset.subset(all.subspan(sizes[0] + sizes[1]))};
}

}  // namespace promptcache
