#include <algorithm>
#include <limits>

#include "convrec/botplay.hpp"
#include "convrec/eval.hpp"
#include "convrec/train.hpp"

namespace convrec {

namespace {

double validation_sr1(const ExpertModel& model, const AspectContext& ctx, const InteractionSet& valid,
                      std::size_t n_pairs, int max_turns, std::uint64_t seed) {
    BenchmarkSpec spec;
    spec.strategies = {Strategy::Pop};
    spec.modes = {"critique"};
    spec.max_turns = max_turns;
    spec.seeds = {seed};
    spec.n_pairs = n_pairs;
    spec.n_grid = {1};
    return run_benchmark(model, ctx, valid, spec).front().sr_at_n.front();
}

}  // namespace

SelectionResult select_hyperparameters(const std::vector<TrainConfig>& grid, const InteractionSet& train,
                                       const InteractionSet& valid, const AspectContext& ctx,
                                       SelectionCriterion criterion, const SelectionOptions& options) {
    if (grid.empty()) throw InvalidInput("select_hyperparameters: empty grid");
    SelectionResult out;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ExpertModel model = train_expert(grid[k], train, ctx);
        const double value = criterion == SelectionCriterion::Auc
                                 ? auc(initial_scorer(model, ctx.user_freq), valid, &train, options.auc_samples,
                                       options.seed)
                                 : validation_sr1(model, ctx, valid, options.sr_pairs, options.max_turns, options.seed);
        out.scores.push_back(value);
        if (k == 0 || value > out.scores[out.best]) {
            out.best = k;
            out.model = std::move(model);
        }
    }
    return out;
}

BotPlaySelection select_botplay_config(const std::vector<BotPlayConfig>& grid, const ExpertModel& model,
                                       const InteractionSet& train, const InteractionSet& valid,
                                       const AspectContext& ctx, std::size_t valid_pairs, std::uint64_t seed) {
    if (grid.empty()) throw InvalidInput("select_botplay_config: empty grid");
    BotPlaySelection out;
    bool found = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ExpertModel tuned;
        try {
            tuned = finetune(model, train, ctx, grid[k]);
        } catch (const BotPlayDiverged&) {
            out.sr1.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double value = validation_sr1(tuned, ctx, valid, valid_pairs, grid[k].max_turns, seed);
        out.sr1.push_back(value);
        if (!found || value > out.sr1[out.best]) {
            found = true;
            out.best = k;
            out.model = std::move(tuned);
        }
    }
    if (!found) throw Diverged("select_botplay_config: every candidate diverged");
    return out;
}

}  // namespace convrec
