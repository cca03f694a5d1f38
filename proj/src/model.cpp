#include "convrec/model.hpp"

#include <fstream>
#include <sstream>

#include "convrec/io.hpp"

namespace convrec {

using nlohmann::json;

std::string to_string(ModelKind kind) { return kind == ModelKind::Bpr ? "bpr" : "plrec"; }

ModelKind parse_model_kind(const std::string& name) {
    if (name == "bpr") return ModelKind::Bpr;
    if (name == "plrec") return ModelKind::Plrec;
    throw InvalidInput("unknown model kind \"" + name + "\"");
}

void ExpertModel::check_consistent() const {
    const auto h = item.cols();
    const auto k = encoder.weight.rows();
    auto fail = [](const std::string& what) { throw InvalidInput("inconsistent model: " + what); };
    if (h < 1) fail("h < 1");
    if (user_base.cols() != h) fail("user embedding width");
    if (encoder.weight.cols() != h || encoder.bias.size() != h) fail("encoder width");
    if (head.w1.rows() != h || head.w1.cols() != h || head.b1.size() != h) fail("head layer 1");
    if (head.w2.rows() != h || head.w2.cols() != h || head.b2.size() != h) fail("head layer 2");
    if (head.w3.rows() != k || head.w3.cols() != h || head.b3.size() != k) fail("head output layer");
    if (projection.size() != 0 && (projection.rows() != item.rows() || projection.cols() != h)) {
        fail("projection shape");
    }
}

Vector ExpertModel::user_vector(const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& critique) const {
    return fuse(base, encode(critique, encoder), fusion);
}

Vector ExpertModel::aspect_probs(const Eigen::Ref<const Vector>& user_vec, int item_index) const {
    return predict_aspect_probs(user_vec, item.row(item_index).transpose(), head);
}

namespace {

struct NamedArray {
    const char* name;
    Eigen::Index rows;
    Eigen::Index cols;
    const double* data;  // row-major
};

std::vector<NamedArray> arrays_of(const ExpertModel& m) {
    std::vector<NamedArray> arrays = {
        {"user_base", m.user_base.rows(), m.user_base.cols(), m.user_base.data()},
        {"item", m.item.rows(), m.item.cols(), m.item.data()},
        {"encoder.weight", m.encoder.weight.rows(), m.encoder.weight.cols(), m.encoder.weight.data()},
        {"encoder.bias", m.encoder.bias.size(), 1, m.encoder.bias.data()},
        {"head.w1", m.head.w1.rows(), m.head.w1.cols(), m.head.w1.data()},
        {"head.b1", m.head.b1.size(), 1, m.head.b1.data()},
        {"head.w2", m.head.w2.rows(), m.head.w2.cols(), m.head.w2.data()},
        {"head.b2", m.head.b2.size(), 1, m.head.b2.data()},
        {"head.w3", m.head.w3.rows(), m.head.w3.cols(), m.head.w3.data()},
        {"head.b3", m.head.b3.size(), 1, m.head.b3.data()},
    };
    if (m.projection.size() != 0) {
        arrays.push_back({"projection", m.projection.rows(), m.projection.cols(), m.projection.data()});
    }
    return arrays;
}

}  // namespace

std::string serialize_model(const ExpertModel& model) {
    model.check_consistent();
    json header = {{"format_version", io::kFormatVersion},
                   {"model_kind", to_string(model.kind)},
                   {"fusion", to_string(model.fusion)},
                   {"h", model.dim()},
                   {"n_users", model.n_users()},
                   {"n_items", model.n_items()},
                   {"n_aspects", model.n_aspects()},
                   {"seed", model.seed},
                   {"hyperparams", model.hyperparams},
                   {"extra", model.extra},
                   {"manifest", model.manifest},
                   {"dtype", "float64"}};
    std::vector<std::byte> payload;
    json declared = json::array();
    for (const auto& a : arrays_of(model)) {
        declared.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
        for (Eigen::Index k = 0; k < a.rows * a.cols; ++k) io::append_f64(payload, a.data[k]);
    }
    header["arrays"] = declared;
    std::ostringstream out;
    io::write_container(out, io::kModelMagic, header, payload);
    return out.str();
}

void save_model(const std::filesystem::path& path, const ExpertModel& model) {
    io::write_file(path, serialize_model(model));
}

ExpertModel deserialize_model(const std::string& bytes) {
    std::istringstream in(bytes);
    io::RawContainer raw = io::read_container(in, io::kModelMagic);
    const json& h = raw.header;
    ExpertModel m;
    m.kind = parse_model_kind(h.at("model_kind").get<std::string>());
    m.fusion = parse_fusion(h.at("fusion").get<std::string>());
    m.seed = h.at("seed").get<std::uint64_t>();
    m.hyperparams = h.value("hyperparams", json::object());
    m.extra = h.value("extra", json::object());
    m.manifest = h.value("manifest", json::object());

    std::size_t offset = 0;
    auto take = [&](Eigen::Index rows, Eigen::Index cols) {
        Matrix out(rows, cols);
        for (Eigen::Index k = 0; k < rows * cols; ++k, offset += 8) out.data()[k] = io::read_f64(raw.payload, offset);
        return out;
    };
    for (const auto& a : h.at("arrays")) {
        const auto name = a.at("name").get<std::string>();
        const auto rows = a.at("rows").get<Eigen::Index>();
        const auto cols = a.at("cols").get<Eigen::Index>();
        Matrix value = take(rows, cols);
        auto as_vector = [&]() -> Vector { return Eigen::Map<const Vector>(value.data(), value.size()); };
        if (name == "user_base") m.user_base = std::move(value);
        else if (name == "item") m.item = std::move(value);
        else if (name == "encoder.weight") m.encoder.weight = std::move(value);
        else if (name == "encoder.bias") m.encoder.bias = as_vector();
        else if (name == "head.w1") m.head.w1 = std::move(value);
        else if (name == "head.b1") m.head.b1 = as_vector();
        else if (name == "head.w2") m.head.w2 = std::move(value);
        else if (name == "head.b2") m.head.b2 = as_vector();
        else if (name == "head.w3") m.head.w3 = std::move(value);
        else if (name == "head.b3") m.head.b3 = as_vector();
        else if (name == "projection") m.projection = std::move(value);
        else throw Error("unknown model array \"" + name + "\"");
    }
    if (offset != raw.payload.size()) throw Error("model payload size mismatch");
    m.check_consistent();
    return m;
}

ExpertModel load_model(const std::filesystem::path& path) { return deserialize_model(io::read_file(path)); }

AspectContext AspectContext::from(const AspectMatrices& m) {
    AspectContext ctx;
    ctx.user_freq = m.user_freq.cast<double>();
    ctx.item_presence = m.item_presence.cast<double>();
    ctx.item_freq = m.item_freq.cast<double>();
    ctx.popularity = m.popularity();
    return ctx;
}

Dataset build_dataset(const std::vector<Review>& reviews, double rating_threshold, const SplitSpec& split,
                      const AspectConfig& aspects, const PhraseFilter* filter) {
    SplitData s = filter_and_split(reviews, rating_threshold, split);
    Dataset d;
    d.vocab = extract_aspect_vocabulary(s.train_reviews, aspects, filter);
    d.matrices = build_aspect_matrices(s.train_reviews, static_cast<int>(s.user_ids.size()),
                                       static_cast<int>(s.item_ids.size()), d.vocab);
    d.user_ids = std::move(s.user_ids);
    d.item_ids = std::move(s.item_ids);
    d.train = std::move(s.train);
    d.valid = std::move(s.valid);
    d.test = std::move(s.test);
    return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data, const json& manifest) {
    std::filesystem::create_directories(dir);
    io::write_string_list(dir / "users.json", data.user_ids);
    io::write_string_list(dir / "items.json", data.item_ids);
    io::write_string_list(dir / "aspects.json", data.vocab.aspects());
    io::write_interactions(dir / "train.spm", data.train);
    io::write_interactions(dir / "valid.spm", data.valid);
    io::write_interactions(dir / "test.spm", data.test);
    io::write_sparse(dir / "user_aspects.spm", data.matrices.user_freq);
    io::write_sparse(dir / "item_aspects.spm", data.matrices.item_freq);
    if (!manifest.is_null()) io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset d;
    d.user_ids = io::read_string_list(dir / "users.json");
    d.item_ids = io::read_string_list(dir / "items.json");
    d.vocab = AspectVocabulary(io::read_string_list(dir / "aspects.json"));
    d.train = io::read_interactions(dir / "train.spm");
    d.valid = io::read_interactions(dir / "valid.spm");
    d.test = io::read_interactions(dir / "test.spm");
    d.matrices.user_freq = io::read_sparse(dir / "user_aspects.spm");
    d.matrices.item_freq = io::read_sparse(dir / "item_aspects.spm");
    d.matrices.item_presence = (d.matrices.item_freq.array() >= 1).cast<std::int64_t>();
    const auto n_users = static_cast<Eigen::Index>(d.user_ids.size());
    const auto n_items = static_cast<Eigen::Index>(d.item_ids.size());
    if (d.train.n_users() != n_users || d.train.n_items() != n_items ||
        d.matrices.user_freq.rows() != n_users || d.matrices.item_freq.rows() != n_items ||
        d.matrices.user_freq.cols() != d.vocab.size() || d.matrices.item_freq.cols() != d.vocab.size()) {
        throw Error("dataset directory " + dir.string() + " has inconsistent dimensions");
    }
    return d;
}

}  // namespace convrec
