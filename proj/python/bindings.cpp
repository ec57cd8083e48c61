#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "promptcache/core.hpp"
#include "promptcache/dataset.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/errors.hpp"
#include "promptcache/loss.hpp"
#include "promptcache/metrics.hpp"
#include "promptcache/model.hpp"
#include "promptcache/simcache.hpp"
#include "promptcache/synth.hpp"
#include "promptcache/train.hpp"

namespace py = pybind11;
using namespace promptcache;

namespace {

using Vec = std::vector<double>;
using PairTuple = std::tuple<Vec, Vec, double>;
using IdPair = std::tuple<std::string, std::string, double>;
using EmbeddingList = std::vector<std::pair<std::string, Vec>>;

EmbeddingStore to_store(const EmbeddingList& items) {
    EmbeddingStore store;
    for (const auto& [id, v] : items) store.add(id, Embedding(v));
    return store;
}

EmbeddingList from_store(const EmbeddingStore& store) {
    EmbeddingList out;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto values = store.at_index(i).values();
        out.emplace_back(store.ids()[i], Vec(values.begin(), values.end()));
    }
    return out;
}

PairDataset to_dataset(const std::vector<IdPair>& pairs) {
    PairDataset ds;
    for (const auto& [a, b, label] : pairs) {
        ds.add_prompt({a, a});
        ds.add_prompt({b, b});
        ds.add_pair({a, b, label, std::nullopt});
    }
    return ds;
}

std::vector<std::tuple<std::string, std::string, double, std::optional<double>>> from_dataset(
    const PairDataset& ds) {
    std::vector<std::tuple<std::string, std::string, double, std::optional<double>>> out;
    for (const auto& p : ds.pairs()) out.emplace_back(p.first_id, p.second_id, p.label, p.similarity);
    return out;
}

template <typename Fn>
double with_batch(const std::vector<PairTuple>& pairs, Fn&& fn) {
    std::vector<Embedding> storage;
    storage.reserve(2 * pairs.size());
    for (const auto& [a, b, label] : pairs) {
        storage.emplace_back(a);
        storage.emplace_back(b);
    }
    std::vector<PairItem> items;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        items.push_back({std::cref(storage[2 * i]), std::cref(storage[2 * i + 1]),
                         std::get<2>(pairs[i])});
    }
    return fn(PairBatch(std::move(items)));
}

SimilarityModel make_model(std::size_t dim, double lambda, double c,
                           std::optional<Vec> weights) {
    if (weights) return SimilarityModel(ProjectionHead(dim, std::move(*weights)), {lambda, c});
    return SimilarityModel(dim, {lambda, c});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Embedding-similarity prompt caching: models, losses, datasets and simulation";

    auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    (void)data_error;

    m.def("cosine_similarity",
          [](const Vec& x, const Vec& y) { return cosine_similarity(Embedding(x), Embedding(y)); },
          py::arg("x"), py::arg("y"));
    m.def("sigmoid", &sigmoid, py::arg("x"));

    py::class_<SimilarityModel>(m, "SimilarityModel")
        .def(py::init(&make_model), py::arg("dim"), py::arg("lambda_") = 0.01,
             py::arg("c") = 88.0, py::arg("weights") = py::none())
        .def_property_readonly("dim", &SimilarityModel::dim)
        .def_property_readonly("lambda_", [](const SimilarityModel& s) { return s.calibration().lambda; })
        .def_property_readonly("c", [](const SimilarityModel& s) { return s.calibration().c; })
        .def_property_readonly("weights", [](const SimilarityModel& s) {
            const auto w = s.head().weights();
            return Vec(w.begin(), w.end());
        })
        .def("similarity", [](const SimilarityModel& s, const Vec& a, const Vec& b) {
            return s.similarity(Embedding(a), Embedding(b));
        })
        .def("logit", [](const SimilarityModel& s, const Vec& a, const Vec& b) {
            return s.logit(Embedding(a), Embedding(b));
        })
        .def("predict_prob", [](const SimilarityModel& s, const Vec& a, const Vec& b) {
            return s.predict_prob(Embedding(a), Embedding(b));
        })
        .def("save", [](const SimilarityModel& s, const std::filesystem::path& p) {
            save_checkpoint(s, p);
        })
        .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); });

    m.def("bce_loss", [](const SimilarityModel& model, const std::vector<PairTuple>& pairs) {
        return with_batch(pairs, [&](const PairBatch& b) { return bce_loss(model, b); });
    }, py::arg("model"), py::arg("pairs"));
    m.def("sld_loss", [](const SimilarityModel& model, const std::vector<PairTuple>& pairs) {
        return with_batch(pairs, [&](const PairBatch& b) { return sld_loss(model, b); });
    }, py::arg("model"), py::arg("pairs"));

    m.def("roc_auc", [](const Vec& scores, const std::vector<int>& labels) {
        return roc_auc(scores, labels).auc;
    }, py::arg("scores"), py::arg("labels"));
    m.def("roc_curve", [](const Vec& scores, const std::vector<int>& labels) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : roc_auc(scores, labels).points) pts.emplace_back(p.fpr, p.tpr);
        return pts;
    }, py::arg("scores"), py::arg("labels"));

    m.def("caching_efficiency", &caching_efficiency, py::arg("n_correct_hit"),
          py::arg("n_false_hit"), py::arg("n_expected_hit"));

    m.def("read_embeddings", [](const std::filesystem::path& p) {
        return from_store(read_embeddings(p));
    }, py::arg("path"), "List of (id, vector) in file order.");
    m.def("write_embeddings", [](const std::filesystem::path& p, const EmbeddingList& items) {
        write_embeddings(to_store(items), p);
    }, py::arg("path"), py::arg("items"));

    m.def("build_hard_dataset", [](const std::vector<IdPair>& pairs, const EmbeddingList& emb) {
        return from_dataset(build_hard_dataset(to_dataset(pairs), to_store(emb)));
    }, py::arg("pairs"), py::arg("embeddings"),
       "Pairs are (id1, id2, label); returns (id1, id2, label, sim) in kept order.");

    m.def("simulate", [](const std::vector<std::string>& stream, const EmbeddingList& emb,
                         double tau, const std::vector<std::pair<std::string, std::string>>& positives,
                         std::size_t n_expected_hit, const SimilarityModel* model) {
        HitOracle oracle;
        for (const auto& [a, b] : positives) oracle.add(a, b);
        const SimReport r = simulate(stream, to_store(emb), model, tau, oracle, n_expected_hit);
        py::dict out;
        out["nCorrectHit"] = r.n_correct_hit;
        out["nFalseHit"] = r.n_false_hit;
        out["nMiss"] = r.n_miss;
        out["nExpectedHit"] = r.n_expected_hit;
        out["efficiency"] = r.efficiency();
        py::list decisions;
        for (const auto& e : r.events) decisions.append(std::string(to_string(e.decision)));
        out["decisions"] = decisions;
        return out;
    }, py::arg("stream"), py::arg("embeddings"), py::arg("tau"), py::arg("positive_pairs"),
       py::arg("n_expected_hit"), py::arg("model") = py::none());

    m.def("train", [](const EmbeddingList& emb, const std::vector<IdPair>& train_pairs,
                      const std::vector<IdPair>& val_pairs, const std::string& loss, double lr,
                      std::size_t epochs, std::size_t batch, std::optional<double> lambda,
                      std::optional<double> c, bool joint, std::uint64_t seed) {
        TrainConfig cfg = TrainConfig::defaults_for(parse_loss_type(loss));
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        if (lambda) cfg.calibration.lambda = *lambda;
        if (c) cfg.calibration.c = *c;
        cfg.joint = joint;
        cfg.seed = seed;
        const EmbeddingStore store = to_store(emb);
        std::optional<TrainReport> rep;
        {
            py::gil_scoped_release release;
            rep = train(store, to_dataset(train_pairs), to_dataset(val_pairs), cfg);
        }
        py::dict out;
        out["train_loss"] = rep->train_loss;
        out["val_auc"] = rep->val_auc;
        out["initial_val_auc"] = rep->initial_val_auc;
        out["model"] = rep->model;
        return out;
    }, py::arg("embeddings"), py::arg("train_pairs"), py::arg("val_pairs") = std::vector<IdPair>{},
       py::arg("loss") = "bce", py::arg("lr") = 1e-5, py::arg("epochs") = 20,
       py::arg("batch") = 16, py::arg("lambda_") = py::none(), py::arg("c") = py::none(),
       py::arg("joint") = false, py::arg("seed") = 0);

    m.def("plant_hard_world", [](std::size_t dim, std::size_t n_prompts, std::uint64_t seed) {
        const HardWorld w = plant_hard_world(dim, n_prompts, seed);
        py::dict out;
        out["embeddings"] = from_store(w.embeddings);
        std::vector<IdPair> pairs;
        for (const auto& p : w.dataset.pairs()) pairs.emplace_back(p.first_id, p.second_id, p.label);
        out["pairs"] = pairs;
        out["base_auc"] = w.base_auc;
        out["plant_auc"] = w.plant_auc;
        return out;
    }, py::arg("dim"), py::arg("n_prompts"), py::arg("seed") = 0);
}
