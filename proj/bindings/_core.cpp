#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "convrec/botplay.hpp"
#include "convrec/eval.hpp"
#include "convrec/model.hpp"
#include "convrec/recsys.hpp"
#include "convrec/service.hpp"
#include "convrec/synth.hpp"
#include "convrec/train.hpp"

namespace py = pybind11;
using namespace convrec;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

const InteractionSet& split_of(const Dataset& d, const std::string& name) {
    if (name == "train") return d.train;
    if (name == "valid") return d.valid;
    if (name == "test") return d.test;
    throw InvalidInput("unknown split: " + name);
}

std::vector<Review> planted_reviews(int users, int items, int aspects, int positives, std::uint64_t seed) {
    PlantedWorldConfig cfg;
    cfg.n_users = users;
    cfg.n_items = items;
    cfg.n_aspects = aspects;
    cfg.positives_per_user = positives;
    cfg.seed = seed;
    return make_planted_world(cfg).reviews;
}

// Live sessions bound to a model and dataset; views come back as dicts.
class Service {
public:
    Service(const ExpertModel& model, const Dataset& data, int top_k, int max_turns) {
        auto d = std::make_shared<ServingData>();
        d->model = model;
        d->ctx = data.context();
        d->user_ids = data.user_ids;
        d->item_ids = data.item_ids;
        d->aspect_labels = data.vocab.aspects();
        ServiceConfig cfg;
        cfg.top_k = static_cast<std::size_t>(top_k);
        cfg.max_turns = max_turns;
        labels_ = d->aspect_labels;
        sessions_ = std::make_unique<SessionManager>(d, cfg);
    }

    py::object create(const std::optional<std::string>& user) { return view(sessions_->create(user)); }
    py::object recommendations(const std::string& id) { return view(sessions_->recommendations(id)); }
    py::object critique(const std::string& id, const AspectSet& aspects, const std::vector<std::string>& shown) {
        return view(sessions_->critique(id, aspects, shown));
    }
    py::object close(const std::string& id, const std::optional<std::string>& accepted) {
        return to_py(to_json(sessions_->close(id, accepted)));
    }
    std::size_t active() const { return sessions_->active(); }

private:
    py::object view(const SessionManager::View& v) {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : v.recommendations) recs.push_back(to_json(r, labels_));
        return to_py({{"session_id", v.session_id}, {"turn", v.turn}, {"recommendations", recs}});
    }

    std::vector<std::string> labels_;
    std::unique_ptr<SessionManager> sessions_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Conversational critiquing recommender";

    // Translators run newest first, so the base class goes first.
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<NotFound>(m, "NotFound", base.ptr());
    py::register_exception<Rejected>(m, "Rejected", base.ptr());
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<Diverged>(m, "Diverged", base.ptr());
    py::register_exception<SessionClosed>(m, "SessionClosed", base.ptr());

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("n_users", [](const Dataset& d) { return d.user_ids.size(); })
        .def_property_readonly("n_items", [](const Dataset& d) { return d.item_ids.size(); })
        .def_property_readonly("aspects", [](const Dataset& d) { return d.vocab.aspects(); })
        .def_readonly("user_ids", &Dataset::user_ids)
        .def_readonly("item_ids", &Dataset::item_ids)
        .def("split_size", [](const Dataset& d, const std::string& s) { return split_of(d, s).size(); })
        .def("pairs", [](const Dataset& d, const std::string& s) { return split_of(d, s).pairs(); })
        .def("user_aspects", [](const Dataset& d) { return Matrix(d.context().user_freq); })
        .def("item_aspects", [](const Dataset& d) { return Matrix(d.context().item_presence); })
        .def("save", [](const Dataset& d, const std::filesystem::path& dir) { save_dataset(dir, d); });

    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def(
        "planted_dataset",
        [](int users, int items, int aspects, int positives, std::uint64_t seed, double threshold, int min_freq) {
            return build_dataset(planted_reviews(users, items, aspects, positives, seed), threshold,
                                 SplitSpec{0.5, 0.2, 0.3, seed}, AspectConfig{min_freq, 1.0, 75});
        },
        py::arg("users") = 200, py::arg("items") = 300, py::arg("aspects") = 40, py::arg("positives") = 30,
        py::arg("seed") = 0, py::arg("threshold") = 3.5, py::arg("min_freq") = 20,
        "Synthesizes a planted-preference review corpus and mines it into a dataset.");
    m.def(
        "extract_aspects",
        [](const std::filesystem::path& reviews, double threshold, std::uint64_t seed, int min_freq, double pmi,
           int max_aspects) {
            auto loaded = load_reviews(reviews);
            return build_dataset(loaded.reviews, threshold, SplitSpec{0.5, 0.2, 0.3, seed},
                                 AspectConfig{min_freq, pmi, max_aspects});
        },
        py::arg("reviews"), py::arg("threshold") = 3.5, py::arg("seed") = 0, py::arg("min_freq") = 20,
        py::arg("pmi") = 1.0, py::arg("max_aspects") = 75);

    py::class_<ExpertModel>(m, "Model")
        .def_property_readonly("kind", [](const ExpertModel& x) { return to_string(x.kind); })
        .def_property_readonly("dim", &ExpertModel::dim)
        .def_property_readonly("n_users", &ExpertModel::n_users)
        .def_property_readonly("n_items", &ExpertModel::n_items)
        .def_property_readonly("n_aspects", &ExpertModel::n_aspects)
        .def_property_readonly("hyperparams", [](const ExpertModel& x) { return to_py(x.hyperparams); })
        .def_readonly("item_embeddings", &ExpertModel::item)
        .def("save", [](const ExpertModel& x, const std::filesystem::path& p) { save_model(p, x); })
        .def("to_bytes", [](const ExpertModel& x) { return py::bytes(serialize_model(x)); })
        .def(
            "scores",
            [](const ExpertModel& x, const Dataset& d, int user) {
                return Vector(initial_scorer(x, d.context().user_freq)(user));
            },
            py::arg("dataset"), py::arg("user"))
        .def(
            "recommend",
            [](const ExpertModel& x, const Dataset& d, int user, int k) {
                auto ranked = rank_items(initial_scorer(x, d.context().user_freq)(user));
                if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
                return ranked;
            },
            py::arg("dataset"), py::arg("user"), py::arg("k") = 10);

    m.def("load_model", &load_model, py::arg("path"));
    m.def(
        "train",
        [](const Dataset& d, const std::string& kind, py::dict overrides) {
            TrainConfig cfg;
            cfg.kind = parse_model_kind(kind);
            auto o = from_py(overrides);
            auto& j = cfg.joint;
            auto& s = cfg.stagewise;
            for (const auto& [k, v] : o.items()) {
                if (k == "h") j.h = s.h = v.get<int>();
                else if (k == "lr") j.lr = v.get<double>();
                else if (k == "l2") j.l2 = s.l2 = v.get<double>();
                else if (k == "lambda_kp") j.lambda_kp = v.get<double>();
                else if (k == "epochs") j.epochs = v.get<int>();
                else if (k == "negatives") j.negatives = v.get<int>();
                else if (k == "init_std") j.init_std = v.get<double>();
                else if (k == "head_epochs") s.head_epochs = v.get<int>();
                else if (k == "head_lr") s.head_lr = v.get<double>();
                else if (k == "seed") j.seed = s.seed = v.get<std::uint64_t>();
                else throw InvalidInput("unknown hyperparameter: " + k);
            }
            py::gil_scoped_release release;
            return train_expert(cfg, d.train, d.context());
        },
        py::arg("dataset"), py::arg("kind") = "bpr", py::arg("hyperparams") = py::dict(),
        "Trains BPR-joint or PLRec-stagewise. Hyperparameter keys: h, lr, l2, lambda_kp, epochs, negatives, "
        "init_std, head_epochs, head_lr, seed.");
    m.def(
        "auc",
        [](const ExpertModel& x, const Dataset& d, const std::string& split, std::size_t samples,
           std::uint64_t seed) {
            const auto ctx = d.context();
            return auc(initial_scorer(x, ctx.user_freq), split_of(d, split), &d.train, samples, seed);
        },
        py::arg("model"), py::arg("dataset"), py::arg("split") = "test", py::arg("samples") = 0,
        py::arg("seed") = 0);
    m.def(
        "botplay",
        [](const ExpertModel& x, const Dataset& d, double lr, int epochs, double discount, int max_turns,
           std::size_t max_sessions, bool train_user_base, bool train_items, bool train_encoder, std::uint64_t seed) {
            BotPlayConfig c;
            c.lr = lr;
            c.epochs = epochs;
            c.discount = discount;
            c.max_turns = max_turns;
            c.max_sessions = max_sessions;
            c.train_user_base = train_user_base;
            c.train_items = train_items;
            c.train_encoder = train_encoder;
            c.seed = seed;
            py::gil_scoped_release release;
            return finetune(x, d.train, d.context(), c);
        },
        py::arg("model"), py::arg("dataset"), py::arg("lr") = 0.01, py::arg("epochs") = 1, py::arg("discount") = 0.9,
        py::arg("max_turns") = 10, py::arg("max_sessions") = 0, py::arg("train_user_base") = true,
        py::arg("train_items") = true, py::arg("train_encoder") = true, py::arg("seed") = 0);
    m.def(
        "simulate",
        [](const ExpertModel& x, const Dataset& d, const std::vector<std::string>& modes,
           const std::vector<std::string>& strategies, const std::vector<std::uint64_t>& seeds, std::size_t pairs,
           int max_turns, const std::string& split) {
            BenchmarkSpec spec;
            spec.modes = modes;
            spec.strategies.clear();
            for (const auto& s : strategies) spec.strategies.push_back(parse_strategy(s));
            spec.seeds = seeds;
            spec.n_pairs = pairs;
            spec.max_turns = max_turns;
            std::vector<BenchmarkReport> reports;
            {
                py::gil_scoped_release release;
                reports = run_benchmark(x, d.context(), split_of(d, split), spec);
            }
            std::ostringstream csv;
            write_reports_csv(csv, reports);
            std::istringstream in(csv.str());
            py::list rows;
            for (const auto& r : read_report_csv(in)) {
                py::dict row;
                row["strategy"] = r.strategy;
                row["mode"] = r.mode;
                row["seed"] = r.seed;
                row["N"] = r.n;
                row["sr_at_n"] = r.sr_at_n;
                row["avg_len"] = r.avg_len;
                row["turns_to_n"] = r.turns_to_n;
                row["hit_rate"] = r.hit_rate;
                row["samples"] = r.samples;
                rows.append(row);
            }
            return rows;
        },
        py::arg("model"), py::arg("dataset"), py::arg("modes") = std::vector<std::string>{"critique"},
        py::arg("strategies") = std::vector<std::string>{"pop"}, py::arg("seeds") = std::vector<std::uint64_t>{0},
        py::arg("pairs") = 500, py::arg("max_turns") = 10, py::arg("split") = "test",
        "Runs simulated sessions and returns one dict per (strategy, mode, seed, N).");
    m.def(
        "session",
        [](const ExpertModel& x, const Dataset& d, int user, int goal, const std::string& mode,
           const std::string& strategy, int max_turns, std::uint64_t seed) {
            return to_py(to_json(run_session(x, d.context(), user, goal, mode, parse_strategy(strategy), max_turns, seed)));
        },
        py::arg("model"), py::arg("dataset"), py::arg("user"), py::arg("goal"), py::arg("mode") = "critique",
        py::arg("strategy") = "pop", py::arg("max_turns") = 10, py::arg("seed") = 0);

    py::class_<Service>(m, "Service")
        .def(py::init<const ExpertModel&, const Dataset&, int, int>(), py::arg("model"), py::arg("dataset"),
             py::arg("top_k") = 3, py::arg("max_turns") = 10)
        .def("create", &Service::create, py::arg("user_id") = std::nullopt)
        .def("recommendations", &Service::recommendations, py::arg("session_id"))
        .def("critique", &Service::critique, py::arg("session_id"), py::arg("aspects"),
             py::arg("shown") = std::vector<std::string>{})
        .def("close", &Service::close, py::arg("session_id"), py::arg("accepted") = std::nullopt)
        .def_property_readonly("active", &Service::active);

    m.def("feedback_score", &feedback_score, py::arg("answer"));
}
