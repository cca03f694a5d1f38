#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "convrec/botplay.hpp"
#include "convrec/eval.hpp"
#include "convrec/io.hpp"
#include "convrec/manifest.hpp"
#include "convrec/model.hpp"
#include "convrec/service.hpp"
#include "convrec/synth.hpp"
#include "convrec/train.hpp"

using namespace convrec;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Progress goes to stdout as one JSON object per line.
void emit(const json& event) { std::cout << event.dump() << std::endl; }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
    std::vector<T> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, int>) {
                out.push_back(std::stoi(item, &used));
            } else {
                out.push_back(static_cast<T>(std::stoull(item, &used)));
            }
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw InvalidInput(std::string("bad ") + what + " '" + item + "'");
        }
    }
    if (out.empty()) throw InvalidInput(std::string("empty ") + what + " list");
    return out;
}

// Options of a parsed subcommand as {long name: value}; the manifest config echo.
json echo_config(const CLI::App& sub) {
    json j = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        if (opt->get_type_size() == 0) {
            j[name] = opt->count() > 0 && opt->as<bool>();
        } else if (opt->count() > 0) {
            j[name] = opt->results().front();
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

RunManifest manifest_for(const CLI::App& sub, std::uint64_t seed) {
    RunManifest m;
    m.subcommand = sub.get_name();
    m.config = echo_config(sub);
    m.seed = seed;
    return m;
}

// Dataset directory named on the command line, or recorded in the model's manifest.
fs::path resolve_data(const std::string& flag, const ExpertModel& model) {
    if (!flag.empty()) return flag;
    const auto& cfg = model.manifest.value("config", json::object());
    if (cfg.contains("data") && cfg["data"].is_string() && !cfg["data"].get<std::string>().empty()) {
        return cfg["data"].get<std::string>();
    }
    throw InvalidInput("no --data given and the model manifest does not name a dataset");
}

void check_matches(const ExpertModel& model, const Dataset& data) {
    if (model.n_users() != static_cast<int>(data.user_ids.size()) ||
        model.n_items() != static_cast<int>(data.item_ids.size()) || model.n_aspects() != data.vocab.size()) {
        throw InvalidInput("model and dataset disagree on users, items or aspects");
    }
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
    std::string body;
    for (const auto& l : lines) body += l.dump() + "\n";
    io::write_file(path, body);
}

struct SynthArgs {
    std::string out, metadata;
    int users = 200, items = 300, aspects = 40, positives = 30;
    std::uint64_t seed = 0;
};

int run_synth(const CLI::App& sub, const SynthArgs& a) {
    PlantedWorldConfig cfg;
    cfg.n_users = a.users;
    cfg.n_items = a.items;
    cfg.n_aspects = a.aspects;
    cfg.positives_per_user = a.positives;
    cfg.seed = a.seed;
    const auto world = make_planted_world(cfg);
    std::vector<json> lines;
    for (const auto& r : world.reviews) {
        lines.push_back({{"user_id", r.user_id}, {"item_id", r.item_id}, {"rating", r.rating}, {"text", r.text}});
    }
    write_jsonl(a.out, lines);
    auto m = manifest_for(sub, a.seed);
    m.add_output(a.out);
    if (!a.metadata.empty()) {
        std::vector<json> meta;
        for (const auto& [id, title] : world.titles) meta.push_back({{"item_id", id}, {"title", title}});
        write_jsonl(a.metadata, meta);
        m.add_output(a.metadata);
        write_manifest_sidecar(a.metadata, m);
    }
    write_manifest_sidecar(a.out, m);
    emit({{"event", "done"}, {"subcommand", "synth-corpus"}, {"reviews", world.reviews.size()}, {"out", a.out}});
    return 0;
}

struct ExtractArgs {
    std::string reviews, out;
    double threshold = 3.5;
    double train = 0.5, valid = 0.2, test = 0.3;
    std::uint64_t seed = 0;
    int min_freq = 20, max_aspects = 75;
    double pmi = 1.0;
    std::string user_field = "user_id", item_field = "item_id", rating_field = "rating", text_field = "text";
};

int run_extract(const CLI::App& sub, const ExtractArgs& a) {
    ReviewSchema schema{a.user_field, a.item_field, a.rating_field, a.text_field};
    const auto loaded = load_reviews(a.reviews, schema);
    for (const auto& e : loaded.errors) {
        emit({{"event", "skipped_record"}, {"line", e.line}, {"reason", e.message}});
    }
    SplitSpec split{a.train, a.valid, a.test, a.seed};
    AspectConfig aspects{a.min_freq, a.pmi, a.max_aspects};
    const auto data = build_dataset(loaded.reviews, a.threshold, split, aspects);
    auto m = manifest_for(sub, a.seed);
    m.add_input(a.reviews);
    m.add_output(a.out);
    save_dataset(a.out, data, m.to_json());
    emit({{"event", "done"},
          {"subcommand", "extract-aspects"},
          {"users", data.user_ids.size()},
          {"items", data.item_ids.size()},
          {"aspects", data.vocab.size()},
          {"train", data.train.size()},
          {"valid", data.valid.size()},
          {"test", data.test.size()},
          {"skipped", loaded.errors.size()}});
    return 0;
}

struct TrainArgs {
    std::string data, out, kind = "bpr", grid, select = "auc";
    int h = 0, epochs = 200, negatives = 1, head_epochs = 10;
    double lr = 0.001, l2 = -1.0, lambda_kp = 0.5, init_std = 0.01, head_lr = 0.01;
    std::size_t auc_samples = 20000, sr_pairs = 500;
    std::uint64_t seed = 0;
};

// Grid entries override the base config's hyperparameters by name.
TrainConfig overlay(TrainConfig c, const json& j) {
    for (const auto& [k, v] : j.items()) {
        if (k == "h") {
            c.joint.h = c.stagewise.h = v.get<int>();
        } else if (k == "lr") {
            c.joint.lr = v.get<double>();
        } else if (k == "l2") {
            c.joint.l2 = c.stagewise.l2 = v.get<double>();
        } else if (k == "lambda_kp") {
            c.joint.lambda_kp = v.get<double>();
        } else if (k == "epochs") {
            c.joint.epochs = v.get<int>();
        } else if (k == "negatives") {
            c.joint.negatives = v.get<int>();
        } else if (k == "init_std") {
            c.joint.init_std = v.get<double>();
        } else if (k == "head_epochs") {
            c.stagewise.head_epochs = v.get<int>();
        } else if (k == "head_lr") {
            c.stagewise.head_lr = v.get<double>();
        } else {
            throw InvalidInput("unknown grid key '" + k + "'");
        }
    }
    return c;
}

int run_train(const CLI::App& sub, const TrainArgs& a) {
    const auto data = load_dataset(a.data);
    const auto ctx = data.context();
    TrainConfig cfg;
    cfg.kind = parse_model_kind(a.kind);
    cfg.joint.h = a.h > 0 ? a.h : cfg.joint.h;
    cfg.joint.lr = a.lr;
    cfg.joint.l2 = a.l2 >= 0 ? a.l2 : cfg.joint.l2;
    cfg.joint.lambda_kp = a.lambda_kp;
    cfg.joint.epochs = a.epochs;
    cfg.joint.negatives = a.negatives;
    cfg.joint.init_std = a.init_std;
    cfg.joint.seed = a.seed;
    cfg.stagewise.h = a.h > 0 ? a.h : cfg.stagewise.h;
    cfg.stagewise.l2 = a.l2 >= 0 ? a.l2 : cfg.stagewise.l2;
    cfg.stagewise.head_epochs = a.head_epochs;
    cfg.stagewise.head_lr = a.head_lr;
    cfg.stagewise.seed = a.seed;

    auto m = manifest_for(sub, a.seed);
    m.add_input(a.data);
    ExpertModel model;
    if (!a.grid.empty()) {
        m.add_input(a.grid);
        const auto grid_json = json::parse(io::read_file(a.grid));
        if (!grid_json.is_array() || grid_json.empty()) throw InvalidInput("--grid must hold a non-empty JSON array");
        std::vector<TrainConfig> grid;
        for (const auto& g : grid_json) grid.push_back(overlay(cfg, g));
        const auto criterion = a.select == "sr1" ? SelectionCriterion::Sr1 : SelectionCriterion::Auc;
        if (a.select != "sr1" && a.select != "auc") throw InvalidInput("--select must be auc or sr1");
        SelectionOptions opts;
        opts.auc_samples = a.auc_samples;
        opts.sr_pairs = a.sr_pairs;
        opts.seed = a.seed;
        auto sel = select_hyperparameters(grid, data.train, data.valid, ctx, criterion, opts);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            emit({{"event", "candidate"}, {"index", k}, {"config", grid[k].to_json()}, {a.select, sel.scores[k]}});
        }
        model = std::move(sel.model);
        emit({{"event", "selected"}, {"index", sel.best}});
    } else {
        model = train_expert(cfg, data.train, ctx);
    }
    const double valid_auc = auc(initial_scorer(model, ctx.user_freq), data.valid, &data.train, a.auc_samples, a.seed);
    m.add_output(a.out);
    model.manifest = m.to_json();
    save_model(a.out, model);
    emit({{"event", "done"}, {"subcommand", "train"}, {"model", to_string(model.kind)}, {"valid_auc", valid_auc}});
    return 0;
}

struct BotplayArgs {
    std::string data, model, out;
    double lr = 0.01, discount = 0.9;
    int epochs = 1, max_turns = 10;
    std::size_t max_sessions = 0;
    bool mask_critiqued = false, freeze_user_base = false, freeze_items = false, freeze_encoder = false;
    std::uint64_t seed = 0;
};

int run_botplay(const CLI::App& sub, const BotplayArgs& a) {
    const auto base = load_model(a.model);
    const fs::path data_dir = resolve_data(a.data, base);
    const auto data = load_dataset(data_dir);
    check_matches(base, data);
    BotPlayConfig cfg;
    cfg.lr = a.lr;
    cfg.discount = a.discount;
    cfg.epochs = a.epochs;
    cfg.max_turns = a.max_turns;
    cfg.max_sessions = a.max_sessions;
    cfg.mask_critiqued = a.mask_critiqued;
    cfg.train_user_base = !a.freeze_user_base;
    cfg.train_items = !a.freeze_items;
    cfg.train_encoder = !a.freeze_encoder;
    cfg.seed = a.seed;
    FinetuneStats stats;
    ExpertModel tuned;
    try {
        tuned = finetune(base, data.train, data.context(), cfg, &stats);
    } catch (const BotPlayDiverged& e) {
        emit({{"event", "diverged"}, {"detail", e.what()}});
        throw;
    }
    for (std::size_t k = 0; k < stats.epoch_loss.size(); ++k) {
        emit({{"event", "epoch"}, {"epoch", k + 1}, {"loss", stats.epoch_loss[k]}, {"success", stats.epoch_success[k]}});
    }
    auto m = manifest_for(sub, a.seed);
    m.config["data"] = data_dir.string();
    m.add_input(a.model);
    m.add_input(data_dir);
    m.add_output(a.out);
    tuned.manifest = m.to_json();
    save_model(a.out, tuned);
    emit({{"event", "done"}, {"subcommand", "botplay"}, {"out", a.out}});
    return 0;
}

struct BenchArgs {
    std::string data, model, out, strategy = "pop", seeds = "0", n_grid = "1,5,10,20", transcripts, modes, split = "test";
    std::size_t pairs = 500;
    int max_turns = 10;
    unsigned threads = 1;
};

int run_bench(const CLI::App& sub, const BenchArgs& a, const std::vector<std::string>& modes) {
    const auto model = load_model(a.model);
    const fs::path data_dir = resolve_data(a.data, model);
    const auto data = load_dataset(data_dir);
    check_matches(model, data);
    BenchmarkSpec spec;
    spec.strategies.clear();
    for (const auto& s : split_list(a.strategy)) spec.strategies.push_back(parse_strategy(s));
    if (spec.strategies.empty()) throw InvalidInput("empty --strategy list");
    spec.modes = modes;
    spec.max_turns = a.max_turns;
    spec.seeds = parse_list<std::uint64_t>(a.seeds, "seed");
    spec.n_pairs = a.pairs;
    spec.n_grid = parse_list<int>(a.n_grid, "N");
    spec.threads = a.threads;
    if (a.split != "test" && a.split != "valid") throw InvalidInput("--split must be test or valid");
    const auto& eval_set = a.split == "test" ? data.test : data.valid;

    std::vector<std::vector<SessionResult>> sessions;
    const auto reports = run_benchmark(model, data.context(), eval_set, spec, a.transcripts.empty() ? nullptr : &sessions);
    std::ostringstream csv;
    write_reports_csv(csv, reports);
    io::write_file(a.out, csv.str());
    auto m = manifest_for(sub, spec.seeds.front());
    m.config["data"] = data_dir.string();
    m.add_input(a.model);
    m.add_input(data_dir);
    m.add_output(a.out);
    if (!a.transcripts.empty()) {
        std::vector<json> lines;
        for (std::size_t r = 0; r < reports.size(); ++r) {
            for (const auto& s : sessions[r]) {
                json j = to_json(s);
                j["strategy"] = reports[r].strategy;
                j["mode"] = reports[r].mode;
                j["seed"] = reports[r].seed;
                lines.push_back(std::move(j));
            }
        }
        write_jsonl(a.transcripts, lines);
        m.add_output(a.transcripts);
        write_manifest_sidecar(a.transcripts, m);
    }
    write_manifest_sidecar(a.out, m);
    for (const auto& r : reports) {
        emit({{"event", "report"},
              {"strategy", r.strategy},
              {"mode", r.mode},
              {"seed", r.seed},
              {"sr_at_1", r.sr_at_n.front()},
              {"avg_len", r.avg_length}});
    }
    emit({{"event", "done"}, {"subcommand", sub.get_name()}, {"out", a.out}});
    return 0;
}

struct ServeArgs {
    std::string model, data, metadata, host = "127.0.0.1", log;
    int port = 8080, max_turns = 10;
    long ttl = 1800;
    std::size_t top_k = 3;
};

HttpService* g_http = nullptr;

void on_signal(int) {
    if (g_http) g_http->stop();
}

int run_serve(const ServeArgs& a) {
    auto serving = std::make_shared<ServingData>();
    serving->model = load_model(a.model);
    const fs::path data_dir = resolve_data(a.data, serving->model);
    auto data = load_dataset(data_dir);
    check_matches(serving->model, data);
    serving->ctx = data.context();
    serving->user_ids = data.user_ids;
    serving->item_ids = data.item_ids;
    serving->aspect_labels = data.vocab.aspects();
    if (!a.metadata.empty()) serving->titles = load_item_titles(a.metadata);
    ServiceConfig cfg;
    cfg.top_k = a.top_k;
    cfg.max_turns = a.max_turns;
    cfg.ttl = std::chrono::seconds(a.ttl);
    cfg.transcript_log = a.log;
    SessionManager sessions(serving, cfg);
    HttpService http(sessions);
    const int port = http.bind(a.host, a.port);
    g_http = &http;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    emit({{"event", "listening"}, {"host", a.host}, {"port", port}});
    http.listen();
    g_http = nullptr;
    emit({{"event", "stopped"}});
    return 0;
}

struct ReportArgs {
    std::string in, out, summary;
};

int run_report(const CLI::App& sub, const ReportArgs& a) {
    std::vector<ReportRow> rows;
    auto m = manifest_for(sub, 0);
    for (const auto& path : split_list(a.in)) {
        std::ifstream in(path);
        if (!in) throw NotFound("cannot open report " + path);
        auto part = read_report_csv(in);
        rows.insert(rows.end(), part.begin(), part.end());
        m.add_input(path);
    }
    if (rows.empty()) throw InvalidInput("no report rows to aggregate");
    const auto agg = aggregate_rows(rows);
    std::ostringstream text;
    for (const auto& r : agg) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-8s %-14s N=%-3d runs=%zu  SR@N=%.4f  avg_len=%.4f  turns_to_N=%.4f\n",
                      r.strategy.c_str(), r.mode.c_str(), r.n, static_cast<std::size_t>(r.seed), r.sr_at_n, r.avg_len,
                      r.turns_to_n);
        text << buf;
    }
    if (!a.out.empty()) {
        std::ostringstream csv;
        write_rows_csv(csv, agg, "runs");
        io::write_file(a.out, csv.str());
        m.add_output(a.out);
        write_manifest_sidecar(a.out, m);
    }
    if (!a.summary.empty()) {
        io::write_file(a.summary, text.str());
    } else {
        std::cout << text.str();
    }
    return 0;
}

// Rebuilds a command line from a manifest's config echo.
std::vector<std::string> argv_from_manifest(const RunManifest& m) {
    std::vector<std::string> args = {"convrec", m.subcommand};
    for (const auto& [k, v] : m.config.items()) {
        if (v.is_boolean()) {
            if (v.get<bool>()) args.push_back("--" + k);
        } else if (v.is_string()) {
            if (v.get<std::string>().empty()) continue;
            args.push_back("--" + k);
            args.push_back(v.get<std::string>());
        } else {
            args.push_back("--" + k);
            args.push_back(v.dump());
        }
    }
    return args;
}

RunManifest manifest_at(const fs::path& path) {
    if (fs::is_directory(path)) return RunManifest::from_json(json::parse(io::read_file(path / "manifest.json")));
    if (path.extension() == ".json") return RunManifest::from_json(json::parse(io::read_file(path)));
    const std::string bytes = io::read_file(path);
    if (bytes.rfind("CVRCMOD1", 0) == 0) return RunManifest::from_json(deserialize_model(bytes).manifest);
    fs::path side = path;
    side += ".manifest.json";
    return RunManifest::from_json(json::parse(io::read_file(side)));
}

int dispatch(const std::vector<std::string>& args);

int dispatch_argv(int argc, const char* const* argv) {
    CLI::App app{"Conversational critiquing recommender: extract, train, bot-play, evaluate, serve"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML/INI file; keys mirror flags, in [subcommand] sections");
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth-corpus", "Write a planted-world review corpus");
    s_synth->add_option("--out", synth.out, "Reviews JSONL")->required();
    s_synth->add_option("--metadata", synth.metadata, "Item metadata JSONL (item_id, title)");
    s_synth->add_option("--users", synth.users)->check(CLI::PositiveNumber);
    s_synth->add_option("--items", synth.items)->check(CLI::PositiveNumber);
    s_synth->add_option("--aspects", synth.aspects)->check(CLI::PositiveNumber);
    s_synth->add_option("--positives", synth.positives, "Liked items per user")->check(CLI::PositiveNumber);
    s_synth->add_option("--seed", synth.seed);

    ExtractArgs ex;
    auto* s_ex = app.add_subcommand("extract-aspects", "Split reviews and mine the aspect vocabulary");
    s_ex->add_option("--reviews", ex.reviews, "Reviews JSONL")->required()->check(CLI::ExistingFile);
    s_ex->add_option("--out", ex.out, "Dataset directory")->required();
    s_ex->add_option("--threshold", ex.threshold, "Keep ratings strictly above");
    s_ex->add_option("--train", ex.train);
    s_ex->add_option("--valid", ex.valid);
    s_ex->add_option("--test", ex.test);
    s_ex->add_option("--seed", ex.seed);
    s_ex->add_option("--min-freq", ex.min_freq);
    s_ex->add_option("--pmi", ex.pmi, "Bigram PMI threshold");
    s_ex->add_option("--max-aspects", ex.max_aspects);
    s_ex->add_option("--user-field", ex.user_field);
    s_ex->add_option("--item-field", ex.item_field);
    s_ex->add_option("--rating-field", ex.rating_field);
    s_ex->add_option("--text-field", ex.text_field);

    TrainArgs tr;
    auto* s_tr = app.add_subcommand("train", "Pre-train a recommender with its aspect encoder and justification head");
    s_tr->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    s_tr->add_option("--out", tr.out, "Model file")->required();
    s_tr->add_option("--model", tr.kind, "bpr (joint) or plrec (stagewise)")->check(CLI::IsMember({"bpr", "plrec"}));
    s_tr->add_option("--dim", tr.h, "Latent dimension h (0 = model default)");
    s_tr->add_option("--lr", tr.lr);
    s_tr->add_option("--l2", tr.l2, "Ridge / weight decay (negative = model default)");
    s_tr->add_option("--lambda-kp", tr.lambda_kp);
    s_tr->add_option("--epochs", tr.epochs);
    s_tr->add_option("--negatives", tr.negatives);
    s_tr->add_option("--init-std", tr.init_std);
    s_tr->add_option("--head-epochs", tr.head_epochs);
    s_tr->add_option("--head-lr", tr.head_lr);
    s_tr->add_option("--seed", tr.seed);
    s_tr->add_option("--grid", tr.grid, "JSON array of hyperparameter overrides to select from");
    s_tr->add_option("--select", tr.select, "Selection criterion: auc or sr1")->check(CLI::IsMember({"auc", "sr1"}));
    s_tr->add_option("--auc-samples", tr.auc_samples, "Sampled triples for AUC (0 = all)");
    s_tr->add_option("--sr-pairs", tr.sr_pairs);

    BotplayArgs bp;
    auto* s_bp = app.add_subcommand("botplay", "Fine-tune a pre-trained model by bot-play");
    s_bp->add_option("--model", bp.model, "Pre-trained model")->required()->check(CLI::ExistingFile);
    s_bp->add_option("--data", bp.data, "Dataset directory (default: from the model manifest)");
    s_bp->add_option("--out", bp.out, "Fine-tuned model file")->required();
    s_bp->add_option("--lr", bp.lr);
    s_bp->add_option("--discount", bp.discount);
    s_bp->add_option("--epochs", bp.epochs);
    s_bp->add_option("--max-turns", bp.max_turns);
    s_bp->add_option("--max-sessions", bp.max_sessions, "Sessions per epoch (0 = all training pairs)");
    s_bp->add_flag("--mask-critiqued", bp.mask_critiqued);
    s_bp->add_flag("--freeze-user-base", bp.freeze_user_base);
    s_bp->add_flag("--freeze-items", bp.freeze_items);
    s_bp->add_flag("--freeze-encoder", bp.freeze_encoder);
    s_bp->add_option("--seed", bp.seed);

    BenchArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "Benchmark soft critiquing with simulated users");
    BenchArgs ref;
    ref.modes = "query,filter,filter_rerank";
    auto* s_ref = app.add_subcommand("refine", "Benchmark hard-feedback refinement (query, filter, filter_rerank)");
    for (auto [sub, args] : {std::pair{s_sim, &sim}, std::pair{s_ref, &ref}}) {
        sub->add_option("--model", args->model)->required()->check(CLI::ExistingFile);
        sub->add_option("--data", args->data, "Dataset directory (default: from the model manifest)");
        sub->add_option("--out", args->out, "Report CSV")->required();
        sub->add_option("--strategy", args->strategy, "Comma list of random, pop, diff");
        sub->add_option("--pairs", args->pairs, "Sampled (user, goal) pairs per seed");
        sub->add_option("--seed", args->seeds, "Comma list of seeds");
        sub->add_option("--max-turns", args->max_turns);
        sub->add_option("--n-grid", args->n_grid, "Comma list of N for SR@N");
        sub->add_option("--threads", args->threads);
        sub->add_option("--split", args->split, "test or valid");
        sub->add_option("--transcripts", args->transcripts, "Session transcripts JSONL");
    }
    s_ref->add_option("--mode", ref.modes, "Comma list of query, filter, filter_rerank");

    ServeArgs sv;
    auto* s_sv = app.add_subcommand("serve", "Run the live critiquing HTTP service");
    s_sv->add_option("--model", sv.model)->envname("CONVREC_MODEL")->required();
    s_sv->add_option("--data", sv.data, "Dataset directory (default: from the model manifest)")->envname("CONVREC_DATA");
    s_sv->add_option("--metadata", sv.metadata, "Item metadata JSONL")->envname("CONVREC_METADATA");
    s_sv->add_option("--host", sv.host)->envname("CONVREC_HOST");
    s_sv->add_option("--port", sv.port, "0 picks a free port")->envname("CONVREC_PORT");
    s_sv->add_option("--ttl", sv.ttl, "Idle session lifetime in seconds")->envname("CONVREC_TTL");
    s_sv->add_option("--max-turns", sv.max_turns);
    s_sv->add_option("--top-k", sv.top_k);
    s_sv->add_option("--log", sv.log, "Transcript JSONL")->envname("CONVREC_LOG");

    ReportArgs rp;
    auto* s_rp = app.add_subcommand("report", "Average report CSVs over seeds");
    s_rp->add_option("--in", rp.in, "Comma list of report CSVs")->required();
    s_rp->add_option("--out", rp.out, "Aggregated CSV");
    s_rp->add_option("--summary", rp.summary, "Plain-text summary file (default: stdout)");

    std::string rerun_from;
    auto* s_rr = app.add_subcommand("rerun", "Repeat the run recorded in an artifact's manifest");
    s_rr->add_option("--from", rerun_from, "Model file, dataset directory, manifest JSON or artifact with a sidecar")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*s_synth) return run_synth(*s_synth, synth);
        if (*s_ex) return run_extract(*s_ex, ex);
        if (*s_tr) return run_train(*s_tr, tr);
        if (*s_bp) return run_botplay(*s_bp, bp);
        if (*s_sim) return run_bench(*s_sim, sim, {"critique"});
        if (*s_ref) return run_bench(*s_ref, ref, split_list(ref.modes));
        if (*s_sv) return run_serve(sv);
        if (*s_rp) return run_report(*s_rp, rp);
        if (*s_rr) {
            const auto m = manifest_at(rerun_from);
            if (m.subcommand == "rerun") throw InvalidInput("manifest records a rerun");
            const auto args = argv_from_manifest(m);
            emit({{"event", "rerun"}, {"argv", args}});
            return dispatch(args);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}

int dispatch(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch_argv(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

int main(int argc, char** argv) { return dispatch_argv(argc, argv); }
