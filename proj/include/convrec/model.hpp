#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "convrec/common.hpp"
#include "convrec/corpus.hpp"
#include "convrec/critique.hpp"
#include "convrec/justify.hpp"

namespace convrec {

enum class ModelKind { Bpr, Plrec };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Recommender + aspect encoder + justification head.
struct ExpertModel {
    ModelKind kind = ModelKind::Bpr;
    FusionMode fusion = FusionMode::Sum;
    Matrix user_base;   // gamma^MF, |U| x h
    Matrix item;        // |I| x h
    AspectEncoder encoder;
    JustificationHead head;
    Matrix projection;  // PLRec V (|I| x h); empty for BPR
    std::uint64_t seed = 0;
    nlohmann::json hyperparams = nlohmann::json::object();
    nlohmann::json extra = nlohmann::json::object();  // e.g. bot-play config echo
    nlohmann::json manifest = nlohmann::json::object();

    int dim() const { return static_cast<int>(item.cols()); }
    int n_users() const { return static_cast<int>(user_base.rows()); }
    int n_items() const { return static_cast<int>(item.rows()); }
    int n_aspects() const { return encoder.n_aspects(); }

    // Throws InvalidInput when component shapes disagree.
    void check_consistent() const;

    Vector user_vector(const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& critique) const;
    Vector scores(const Eigen::Ref<const Vector>& user_vec) const { return item * user_vec; }
    Vector aspect_probs(const Eigen::Ref<const Vector>& user_vec, int item_index) const;
};

void save_model(const std::filesystem::path& path, const ExpertModel& model);
std::string serialize_model(const ExpertModel& model);
ExpertModel load_model(const std::filesystem::path& path);
ExpertModel deserialize_model(const std::string& bytes);

// Aspect statistics consumed by critiquing, simulation and serving.
struct AspectContext {
    Matrix user_freq;      // K^U
    Matrix item_presence;  // K^I
    Matrix item_freq;      // F^I
    std::vector<double> popularity;

    static AspectContext from(const AspectMatrices& m);
    int n_aspects() const { return static_cast<int>(item_presence.cols()); }
};

// Everything mined from a review corpus: ids, splits, vocabulary, matrices.
struct Dataset {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    InteractionSet train;
    InteractionSet valid;
    InteractionSet test;
    AspectVocabulary vocab;
    AspectMatrices matrices;

    AspectContext context() const { return AspectContext::from(matrices); }
};

Dataset build_dataset(const std::vector<Review>& reviews, double rating_threshold, const SplitSpec& split,
                      const AspectConfig& aspects, const PhraseFilter* filter = nullptr);

// Directory layout: users.json, items.json, aspects.json, train/valid/test.spm,
// user_aspects.spm (K^U), item_aspects.spm (F^I; K^I is derived).
void save_dataset(const std::filesystem::path& dir, const Dataset& data, const nlohmann::json& manifest = {});
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace convrec
