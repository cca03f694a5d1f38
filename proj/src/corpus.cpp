#include "convrec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace convrec {

using nlohmann::json;

namespace {

bool read_rating(const json& value, double& out) {
    if (value.is_number()) {
        out = value.get<double>();
        return std::isfinite(out);
    }
    if (value.is_string()) {
        const auto& s = value.get_ref<const std::string&>();
        try {
            std::size_t used = 0;
            out = std::stod(s, &used);
            return used == s.size() && std::isfinite(out);
        } catch (const std::exception&) {
            return false;
        }
    }
    return false;
}

bool read_id(const json& value, std::string& out) {
    if (value.is_string()) {
        out = value.get<std::string>();
    } else if (value.is_number_integer()) {
        out = std::to_string(value.get<std::int64_t>());
    } else {
        return false;
    }
    return !out.empty();
}

}  // namespace

LoadedReviews parse_reviews(std::istream& in, const ReviewSchema& schema) {
    LoadedReviews result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            result.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
            continue;
        }
        if (!record.is_object()) {
            result.errors.push_back({line_no, "record is not a JSON object"});
            continue;
        }
        Review review;
        std::string problem;
        auto field = [&](const std::string& name) -> const json* {
            auto it = record.find(name);
            if (it == record.end()) {
                if (problem.empty()) problem = "missing field \"" + name + "\"";
                return nullptr;
            }
            return &*it;
        };
        const json* user = field(schema.user_id);
        const json* item = field(schema.item_id);
        const json* rating = field(schema.rating);
        const json* text = field(schema.text);
        if (problem.empty() && !read_id(*user, review.user_id)) problem = "bad \"" + schema.user_id + "\"";
        if (problem.empty() && !read_id(*item, review.item_id)) problem = "bad \"" + schema.item_id + "\"";
        if (problem.empty() && !read_rating(*rating, review.rating)) problem = "bad \"" + schema.rating + "\"";
        if (problem.empty()) {
            if (!text->is_string()) {
                problem = "bad \"" + schema.text + "\"";
            } else {
                review.text = text->get<std::string>();
            }
        }
        if (!problem.empty()) {
            result.errors.push_back({line_no, "line " + std::to_string(line_no) + ": " + problem});
            continue;
        }
        result.reviews.push_back(std::move(review));
    }
    return result;
}

LoadedReviews load_reviews(const std::filesystem::path& path, const ReviewSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read review file " + path.string());
    }
    return parse_reviews(in, schema);
}

// --- InteractionSet -------------------------------------------------------

InteractionSet::InteractionSet(int n_users, int n_items)
    : n_users_(n_users), n_items_(n_items), positives_(static_cast<std::size_t>(n_users)) {
    if (n_users < 0 || n_items < 0) throw InvalidInput("negative interaction dimensions");
}

InteractionSet::InteractionSet(int n_users, int n_items, std::vector<ItemList> positives)
    : InteractionSet(n_users, n_items) {
    if (static_cast<int>(positives.size()) != n_users) {
        throw InvalidInput("positives must have one list per user");
    }
    for (int u = 0; u < n_users; ++u) {
        for (int i : positives[u]) add(u, i);
    }
}

std::size_t InteractionSet::size() const {
    std::size_t n = 0;
    for (const auto& p : positives_) n += p.size();
    return n;
}

bool InteractionSet::contains(int user, int item) const {
    const auto& p = positives_.at(user);
    return std::binary_search(p.begin(), p.end(), item);
}

bool InteractionSet::add(int user, int item) {
    if (user < 0 || user >= n_users_ || item < 0 || item >= n_items_) {
        throw InvalidInput("interaction (" + std::to_string(user) + ", " + std::to_string(item) +
                           ") out of range");
    }
    auto& p = positives_[user];
    auto it = std::lower_bound(p.begin(), p.end(), item);
    if (it != p.end() && *it == item) return false;
    p.insert(it, item);
    return true;
}

std::vector<std::pair<int, int>> InteractionSet::pairs() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(size());
    for (int u = 0; u < n_users_; ++u) {
        for (int i : positives_[u]) out.emplace_back(u, i);
    }
    return out;
}

Matrix InteractionSet::dense() const {
    Matrix r = Matrix::Zero(n_users_, n_items_);
    for (int u = 0; u < n_users_; ++u) {
        for (int i : positives_[u]) r(u, i) = 1.0;
    }
    return r;
}

// --- splitting ------------------------------------------------------------

void SplitSpec::validate() const {
    if (!(train > 0 && valid > 0 && test > 0)) {
        throw InvalidInput("split fractions must be positive");
    }
    if (std::abs(train + valid + test - 1.0) > 1e-9) {
        throw InvalidInput("split fractions must sum to 1");
    }
}

SplitData filter_and_split(const std::vector<Review>& reviews, double rating_threshold,
                           const SplitSpec& spec) {
    spec.validate();
    SplitData data;
    std::unordered_map<std::string, int> user_index;
    std::unordered_map<std::string, int> item_index;
    auto intern = [](std::unordered_map<std::string, int>& index, std::vector<std::string>& ids,
                     const std::string& id) {
        auto [it, inserted] = index.try_emplace(id, static_cast<int>(ids.size()));
        if (inserted) ids.push_back(id);
        return it->second;
    };

    struct Kept {
        int user;
        int item;
        const std::string* text;
    };
    std::vector<Kept> kept;
    for (const auto& r : reviews) {
        if (!(r.rating > rating_threshold)) continue;
        if (r.user_id.empty() || r.item_id.empty() || !std::isfinite(r.rating)) {
            throw InvalidInput("review with empty id or non-finite rating");
        }
        int u = intern(user_index, data.user_ids, r.user_id);
        int i = intern(item_index, data.item_ids, r.item_id);
        kept.push_back({u, i, &r.text});
    }
    if (kept.empty()) {
        throw InvalidInput("rating threshold " + std::to_string(rating_threshold) + " removed all " +
                           std::to_string(reviews.size()) + " reviews");
    }

    // Distinct pairs in first-appearance order.
    std::vector<std::pair<int, int>> pairs;
    {
        std::map<std::pair<int, int>, bool> seen;
        for (const auto& k : kept) {
            if (seen.emplace(std::make_pair(k.user, k.item), true).second) pairs.emplace_back(k.user, k.item);
        }
    }

    std::mt19937_64 rng(spec.seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto n = static_cast<double>(pairs.size());
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train * n));
    const auto n_valid = std::min(pairs.size() - std::min(pairs.size(), n_train),
                                  static_cast<std::size_t>(std::llround(spec.valid * n)));

    const int n_users = static_cast<int>(data.user_ids.size());
    const int n_items = static_cast<int>(data.item_ids.size());
    data.train = InteractionSet(n_users, n_items);
    data.valid = InteractionSet(n_users, n_items);
    data.test = InteractionSet(n_users, n_items);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto [u, i] = pairs[k];
        if (k < n_train) {
            data.train.add(u, i);
        } else if (k < n_train + n_valid) {
            data.valid.add(u, i);
        } else {
            data.test.add(u, i);
        }
    }
    for (const auto& k : kept) {
        if (data.train.contains(k.user, k.item)) data.train_reviews.push_back({k.user, k.item, *k.text});
    }
    return data;
}

// --- tokenization and aspect mining ---------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

const std::unordered_set<std::string>& default_stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
        "but", "by", "can", "could", "did", "do", "does", "doing", "don", "down", "during", "each",
        "even", "few", "for", "from", "further", "get", "got", "had", "has", "have", "having", "he",
        "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
        "is", "it", "its", "itself", "just", "ll", "me", "more", "most", "much", "my", "myself",
        "no", "nor", "not", "now", "of", "off", "on", "once", "one", "only", "or", "other", "our",
        "ours", "ourselves", "out", "over", "own", "re", "really", "s", "same", "she", "should",
        "so", "some", "such", "t", "than", "that", "the", "their", "theirs", "them", "themselves",
        "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until",
        "up", "ve", "very", "was", "we", "well", "were", "what", "when", "where", "which", "while",
        "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
        "yourselves", "d", "m", "o", "y", "ain", "isn", "wasn", "didn", "doesn", "like", "would",
        "will", "one", "two", "get", "really", "much", "still", "though", "bit", "lot"};
    return words;
}

StopwordFilter::StopwordFilter() : stopwords_(default_stopwords()) {}

StopwordFilter::StopwordFilter(std::unordered_set<std::string> stopwords)
    : stopwords_(std::move(stopwords)) {}

bool StopwordFilter::accept(std::span<const std::string> words) const {
    for (const auto& w : words) {
        if (w.empty() || stopwords_.contains(w)) return false;
        if (std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); })) return false;
    }
    return true;
}

AspectVocabulary::AspectVocabulary(std::vector<std::string> aspects) : aspects_(std::move(aspects)) {
    for (int k = 0; k < static_cast<int>(aspects_.size()); ++k) {
        if (aspects_[k].empty()) throw InvalidInput("empty aspect label");
        if (!index_.emplace(aspects_[k], k).second) {
            throw InvalidInput("duplicate aspect \"" + aspects_[k] + "\"");
        }
    }
}

int AspectVocabulary::index_of(const std::string& aspect) const {
    auto it = index_.find(aspect);
    return it == index_.end() ? -1 : it->second;
}

NgramCounts NgramCounts::from_texts(const std::vector<std::vector<std::string>>& texts) {
    NgramCounts c;
    for (const auto& tokens : texts) {
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            ++c.unigrams[tokens[k]];
            ++c.total_tokens;
            if (k + 1 < tokens.size()) {
                ++c.bigrams[{tokens[k], tokens[k + 1]}];
                ++c.total_bigrams;
            }
        }
    }
    return c;
}

double NgramCounts::pmi(const std::string& w1, const std::string& w2) const {
    auto joint = bigrams.find({w1, w2});
    if (joint == bigrams.end() || total_tokens == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    const double n = static_cast<double>(total_tokens);
    const double p1 = static_cast<double>(unigrams.at(w1)) / n;
    const double p2 = static_cast<double>(unigrams.at(w2)) / n;
    const double p12 = static_cast<double>(joint->second) / n;
    return std::log(p12 / (p1 * p2));
}

AspectVocabulary extract_aspect_vocabulary(const std::vector<TrainReview>& train_reviews,
                                           const AspectConfig& config, const PhraseFilter* filter) {
    if (train_reviews.empty()) throw InvalidInput("no training reviews to mine aspects from");
    if (config.max_aspects < 1) throw InvalidInput("max_aspects must be >= 1");
    StopwordFilter fallback;
    const PhraseFilter& accept = filter ? *filter : fallback;

    std::vector<std::vector<std::string>> texts;
    texts.reserve(train_reviews.size());
    for (const auto& r : train_reviews) texts.push_back(tokenize(r.text));
    const NgramCounts counts = NgramCounts::from_texts(texts);

    struct Candidate {
        std::string phrase;
        std::int64_t freq;
    };
    std::vector<Candidate> survivors;
    for (const auto& [word, freq] : counts.unigrams) {
        std::string words[] = {word};
        if (freq >= config.min_freq && accept.accept(words)) survivors.push_back({word, freq});
    }
    for (const auto& [pair, freq] : counts.bigrams) {
        if (freq < config.min_freq) continue;
        std::string words[] = {pair.first, pair.second};
        if (!accept.accept(words)) continue;
        if (counts.pmi(pair.first, pair.second) < config.pmi_threshold) continue;
        survivors.push_back({pair.first + " " + pair.second, freq});
    }
    if (survivors.empty()) throw InvalidInput("aspect vocabulary is empty after pruning");

    std::sort(survivors.begin(), survivors.end(), [](const Candidate& a, const Candidate& b) {
        if (a.freq != b.freq) return a.freq > b.freq;
        return a.phrase < b.phrase;
    });
    if (static_cast<int>(survivors.size()) > config.max_aspects) survivors.resize(config.max_aspects);
    std::vector<std::string> aspects;
    aspects.reserve(survivors.size());
    for (auto& c : survivors) aspects.push_back(std::move(c.phrase));
    return AspectVocabulary(std::move(aspects));
}

AspectSet match_aspects(const std::vector<std::string>& tokens, const AspectVocabulary& vocab) {
    AspectSet found;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        int a = vocab.index_of(tokens[k]);
        if (a >= 0) found.push_back(a);
        if (k + 1 < tokens.size()) {
            int b = vocab.index_of(tokens[k] + " " + tokens[k + 1]);
            if (b >= 0) found.push_back(b);
        }
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    return found;
}

std::vector<double> AspectMatrices::popularity() const {
    std::vector<double> pop(static_cast<std::size_t>(user_freq.cols()), 0.0);
    for (Eigen::Index a = 0; a < user_freq.cols(); ++a) {
        pop[a] = static_cast<double>(user_freq.col(a).sum());
    }
    return pop;
}

AspectMatrices build_aspect_matrices(const std::vector<TrainReview>& train_reviews, int n_users,
                                     int n_items, const AspectVocabulary& vocab) {
    const int k = vocab.size();
    AspectMatrices m;
    m.user_freq = CountMatrix::Zero(n_users, k);
    m.item_freq = CountMatrix::Zero(n_items, k);
    for (const auto& r : train_reviews) {
        if (r.user < 0 || r.user >= n_users || r.item < 0 || r.item >= n_items) {
            throw InvalidInput("training review index out of range");
        }
        for (int a : match_aspects(tokenize(r.text), vocab)) {
            ++m.user_freq(r.user, a);
            ++m.item_freq(r.item, a);
        }
    }
    m.item_presence = (m.item_freq.array() >= 1).cast<std::int64_t>();
    return m;
}

}  // namespace convrec
