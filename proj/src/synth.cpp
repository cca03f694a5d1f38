#include "convrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace convrec {

std::vector<std::string> aspect_words(int n) {
    static const char* base[] = {
        "citrus",  "hoppy",    "roasted",  "malty",   "smoky",  "fruity",  "bitter", "sweet",
        "creamy",  "crisp",    "floral",   "piney",   "earthy", "spicy",   "tart",   "funky",
        "toasty",  "nutty",    "caramel",  "chocolate", "coffee", "vanilla", "oaky",  "boozy",
        "dry",     "juicy",    "hazy",     "golden",  "dark",   "sour",    "herbal", "grassy",
        "bready",  "honey",    "tropical", "resinous", "woody", "peppery", "smooth", "zesty"};
    constexpr int n_base = static_cast<int>(std::size(base));
    std::vector<std::string> words;
    for (int k = 0; k < n; ++k) {
        words.push_back(k < n_base ? std::string(base[k]) : "aspect" + std::to_string(k));
    }
    return words;
}

PlantedWorld make_planted_world(const PlantedWorldConfig& c) {
    if (c.n_users < 1 || c.n_items < 2 || c.n_aspects < 1 || c.aspects_per_item < 1 ||
        c.aspects_per_item > c.n_aspects || c.positives_per_user < 1 || c.positives_per_user >= c.n_items) {
        throw InvalidInput("invalid planted world configuration");
    }
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    PlantedWorld w;
    w.aspect_words = aspect_words(c.n_aspects);
    w.item_aspects = CountMatrix::Zero(c.n_items, c.n_aspects);
    std::vector<int> all(c.n_aspects);
    std::iota(all.begin(), all.end(), 0);
    // Zipf-like aspect prevalence so popularity is informative.
    std::vector<double> prevalence(c.n_aspects);
    for (int a = 0; a < c.n_aspects; ++a) prevalence[a] = 1.0 / std::sqrt(1.0 + a);
    for (int i = 0; i < c.n_items; ++i) {
        std::vector<double> weight = prevalence;
        for (int k = 0; k < c.aspects_per_item; ++k) {
            std::discrete_distribution<int> pick(weight.begin(), weight.end());
            const int a = pick(rng);
            w.item_aspects(i, a) = 1;
            weight[a] = 0.0;
        }
    }

    w.affinity = Matrix::Zero(c.n_users, c.n_aspects);
    for (int u = 0; u < c.n_users; ++u) {
        std::shuffle(all.begin(), all.end(), rng);
        const int liked = std::min(c.liked_aspects, c.n_aspects);
        const int disliked = std::min(c.disliked_aspects, c.n_aspects - liked);
        for (int k = 0; k < liked; ++k) w.affinity(u, all[k]) = 1.0 + unit(rng);
        for (int k = liked; k < liked + disliked; ++k) w.affinity(u, all[k]) = -(1.0 + unit(rng));
    }

    const Matrix utility = w.affinity * w.item_aspects.cast<double>().transpose();
    static const char* filler[] = {"the", "and", "was", "with", "this", "very", "but", "really", "it", "so"};
    for (int u = 0; u < c.n_users; ++u) {
        // Gumbel top-k: a sample without replacement proportional to exp(utility / T).
        std::vector<std::pair<double, int>> keyed;
        for (int i = 0; i < c.n_items; ++i) {
            const double g = -std::log(-std::log(std::max(unit(rng), 1e-300)));
            keyed.emplace_back(utility(u, i) / c.temperature + g, i);
        }
        std::partial_sort(keyed.begin(), keyed.begin() + c.positives_per_user, keyed.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<int> chosen;
        for (int k = 0; k < c.positives_per_user; ++k) chosen.push_back(keyed[k].second);

        for (int i : chosen) {
            std::string text;
            auto word = [&](const std::string& s) {
                if (!text.empty()) text.push_back(' ');
                text += s;
            };
            for (int a = 0; a < c.n_aspects; ++a) {
                if (!w.item_aspects(i, a)) continue;
                const double p = std::clamp(c.mention_prob + 0.25 * w.affinity(u, a), 0.05, 0.95);
                if (unit(rng) < p) {
                    word(filler[std::uniform_int_distribution<int>(0, 9)(rng)]);
                    word(w.aspect_words[a]);
                }
            }
            word(filler[std::uniform_int_distribution<int>(0, 9)(rng)]);
            w.reviews.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 4.5 + 0.5 * unit(rng), text});
            if (unit(rng) < c.negative_reviews) {
                const int j = std::uniform_int_distribution<int>(0, c.n_items - 1)(rng);
                w.reviews.push_back({"u" + std::to_string(u), "i" + std::to_string(j), 1.0 + 2.0 * unit(rng),
                                     "the " + w.aspect_words[std::uniform_int_distribution<int>(0, c.n_aspects - 1)(rng)]});
            }
        }
    }

    for (int i = 0; i < c.n_items; ++i) {
        std::string title = "Item " + std::to_string(i) + " (";
        bool first = true;
        for (int a = 0; a < c.n_aspects; ++a) {
            if (!w.item_aspects(i, a)) continue;
            title += (first ? "" : ", ") + w.aspect_words[a];
            first = false;
        }
        w.titles.emplace_back("i" + std::to_string(i), title + ")");
    }
    return w;
}

}  // namespace convrec
