#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "convrec/common.hpp"

namespace convrec {

struct Review {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;
    std::string text;
};

// Maps the canonical review fields onto the field names used by a corpus.
struct ReviewSchema {
    std::string user_id = "user_id";
    std::string item_id = "item_id";
    std::string rating = "rating";
    std::string text = "text";
};

struct RecordError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct LoadedReviews {
    std::vector<Review> reviews;
    std::vector<RecordError> errors;
};

// Reads a JSONL review file. Malformed records are reported per line and
// skipped; an unreadable file throws.
LoadedReviews load_reviews(const std::filesystem::path& path, const ReviewSchema& schema = {});
LoadedReviews parse_reviews(std::istream& in, const ReviewSchema& schema = {});

// Implicit-feedback positives. positives[u] is sorted and duplicate-free.
class InteractionSet {
public:
    InteractionSet() = default;
    InteractionSet(int n_users, int n_items);
    InteractionSet(int n_users, int n_items, std::vector<ItemList> positives);

    int n_users() const { return n_users_; }
    int n_items() const { return n_items_; }
    std::size_t size() const;

    const ItemList& positives(int user) const { return positives_.at(user); }
    bool contains(int user, int item) const;

    // Inserts (user, item); returns false if it was already present.
    bool add(int user, int item);

    // All (user, item) pairs in user-major, item-ascending order.
    std::vector<std::pair<int, int>> pairs() const;

    // Binary |U| x |I| interaction matrix R.
    Matrix dense() const;

private:
    int n_users_ = 0;
    int n_items_ = 0;
    std::vector<ItemList> positives_;
};

struct SplitSpec {
    double train = 0.5;
    double valid = 0.2;
    double test = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainReview {
    int user = 0;
    int item = 0;
    std::string text;
};

struct SplitData {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    InteractionSet train;
    InteractionSet valid;
    InteractionSet test;
    // Review texts whose (user, item) pair fell into the training split.
    std::vector<TrainReview> train_reviews;
};

// Keeps reviews rated strictly above the threshold, indexes users and items
// in first-appearance order and assigns each distinct (user, item) pair to
// exactly one split using a seeded shuffle.
SplitData filter_and_split(const std::vector<Review>& reviews, double rating_threshold,
                           const SplitSpec& spec);

// Lowercased alphanumeric tokens; bytes >= 0x80 count as word characters.
std::vector<std::string> tokenize(std::string_view text);

// Decides whether a candidate phrase (one or two tokens) may become an aspect.
class PhraseFilter {
public:
    virtual ~PhraseFilter() = default;
    virtual bool accept(std::span<const std::string> words) const = 0;
};

// Rejects phrases containing a stopword or a purely numeric token.
class StopwordFilter : public PhraseFilter {
public:
    StopwordFilter();
    explicit StopwordFilter(std::unordered_set<std::string> stopwords);
    bool accept(std::span<const std::string> words) const override;

private:
    std::unordered_set<std::string> stopwords_;
};

const std::unordered_set<std::string>& default_stopwords();

struct AspectConfig {
    int min_freq = 20;
    double pmi_threshold = 1.0;
    int max_aspects = 75;
};

class AspectVocabulary {
public:
    AspectVocabulary() = default;
    explicit AspectVocabulary(std::vector<std::string> aspects);

    int size() const { return static_cast<int>(aspects_.size()); }
    const std::vector<std::string>& aspects() const { return aspects_; }
    const std::string& label(int index) const { return aspects_.at(index); }
    // -1 when absent.
    int index_of(const std::string& aspect) const;

private:
    std::vector<std::string> aspects_;
    std::map<std::string, int> index_;
};

// Unigram and bigram occurrence counts over tokenized texts. Bigrams never
// span two texts.
struct NgramCounts {
    std::map<std::string, std::int64_t> unigrams;
    std::map<std::pair<std::string, std::string>, std::int64_t> bigrams;
    std::int64_t total_tokens = 0;
    std::int64_t total_bigrams = 0;

    static NgramCounts from_texts(const std::vector<std::vector<std::string>>& texts);

    // Natural-log PMI with p(w) = c(w)/N and p(w1,w2) = c(w1 w2)/N, N = total tokens.
    double pmi(const std::string& w1, const std::string& w2) const;
};

AspectVocabulary extract_aspect_vocabulary(const std::vector<TrainReview>& train_reviews,
                                           const AspectConfig& config = {},
                                           const PhraseFilter* filter = nullptr);

// Aspects (by index) expressed in one tokenized review: whole-token match for
// unigrams, adjacent-token match for bigrams.
AspectSet match_aspects(const std::vector<std::string>& tokens, const AspectVocabulary& vocab);

struct AspectMatrices {
    CountMatrix user_freq;     // K^U, |U| x |K|
    CountMatrix item_freq;     // F^I, |I| x |K|
    CountMatrix item_presence; // K^I, |I| x |K|, indicator(F^I >= 1)

    // Total mentions of each aspect across all training reviews.
    std::vector<double> popularity() const;
};

AspectMatrices build_aspect_matrices(const std::vector<TrainReview>& train_reviews, int n_users,
                                     int n_items, const AspectVocabulary& vocab);

}  // namespace convrec
