#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convrec/common.hpp"
#include "convrec/corpus.hpp"

namespace convrec {

// Synthetic review corpus whose user preferences are generated from
// affinities to item aspects, so the aspect structure is recoverable.
struct PlantedWorldConfig {
    int n_users = 200;
    int n_items = 300;
    int n_aspects = 40;
    int aspects_per_item = 6;
    int liked_aspects = 4;       // per user
    int disliked_aspects = 3;    // per user
    int positives_per_user = 30;
    double temperature = 0.35;   // softmax temperature of item choice
    double mention_prob = 0.45;  // base chance a review names one of the item's aspects
    double negative_reviews = 0.15;  // low-rated reviews per positive, filtered by the threshold
    std::uint64_t seed = 0;
};

struct PlantedWorld {
    std::vector<Review> reviews;
    std::vector<std::string> aspect_words;
    Matrix affinity;          // |U| x |K|
    CountMatrix item_aspects; // ground-truth item aspect sets, |I| x |K|
    // "item_id -> title" records for the service metadata sidecar.
    std::vector<std::pair<std::string, std::string>> titles;
};

PlantedWorld make_planted_world(const PlantedWorldConfig& config);

// Descriptive unigram aspect words; extra indices get generated names.
std::vector<std::string> aspect_words(int n);

}  // namespace convrec
