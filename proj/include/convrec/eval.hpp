#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "convrec/common.hpp"
#include "convrec/corpus.hpp"
#include "convrec/model.hpp"
#include "convrec/session.hpp"

namespace convrec {

enum class Strategy { Random, Pop, Diff };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

// Critique choice of a simulated user among valid aspects (in the
// justification, absent from the goal's reviews, not yet critiqued).
std::optional<int> user_strategy_select(Strategy strategy, const AspectSet& justification,
                                        const Eigen::Ref<const Vector>& goal_profile,
                                        const Eigen::Ref<const Vector>& current_item_freq,
                                        const Eigen::Ref<const Vector>& goal_freq,
                                        const std::vector<double>& popularity, const AspectSet& critiqued,
                                        std::mt19937_64& rng);

// Multi-step critiquing simulation with soft (latent) critiques. Recommended
// items are excluded from later turns.
SessionResult simulate_session(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                               Strategy strategy, int max_turns, std::uint64_t seed);

struct BenchmarkReport {
    std::string strategy;
    std::string mode;
    std::uint64_t seed = 0;
    int max_turns = 0;
    std::size_t samples = 0;
    std::vector<int> n_grid;
    std::vector<double> sr_at_n;
    std::vector<double> turns_to_n;  // over sessions reaching rank N; NaN if none
    double avg_length = 0.0;         // failures count as max_turns
    std::vector<double> hit_rate_by_turn;  // index t-1: success at or before t
};

BenchmarkReport compute_metrics(const std::vector<SessionResult>& results, const std::vector<int>& n_grid,
                                int max_turns);

// Aspect whose presence most evenly splits the candidates; nullopt when no
// aspect splits them.
std::optional<int> select_query_aspect(const ItemList& candidates, const Matrix& item_presence);

enum class Polarity { Keep, Drop };

// Keep: candidates mentioning the aspect; Drop: candidates that do not.
// Order is preserved. The result may be empty.
ItemList apply_hard_feedback(const ItemList& candidates, int aspect, Polarity polarity, const Matrix& item_presence);

enum class RefineMode { Query, Filter, FilterRerank };

RefineMode parse_refine_mode(const std::string& name);
std::string to_string(RefineMode mode);

// Hard-feedback sessions. The candidate list starts as the full turn-0
// ranking. Filter modes critique with `strategy` (Pop by default).
SessionResult run_refinement_session(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                                     RefineMode mode, int max_turns, std::uint64_t seed,
                                     Strategy strategy = Strategy::Pop);

struct BenchmarkSpec {
    std::vector<Strategy> strategies = {Strategy::Pop};
    // "critique" (soft critiquing), "query", "filter", "filter_rerank"
    std::vector<std::string> modes = {"critique"};
    int max_turns = 10;
    std::vector<std::uint64_t> seeds = {0};
    std::size_t n_pairs = 500;
    std::vector<int> n_grid = {1, 5, 10, 20};
    unsigned threads = 1;
};

// Samples n_pairs test interactions per seed and runs every mode/strategy.
// Query mode ignores the strategy and runs once per seed.
std::vector<BenchmarkReport> run_benchmark(const ExpertModel& model, const AspectContext& ctx,
                                           const InteractionSet& test, const BenchmarkSpec& spec,
                                           std::vector<std::vector<SessionResult>>* sessions = nullptr);

std::vector<std::pair<int, int>> sample_pairs(const InteractionSet& set, std::size_t n, std::uint64_t seed);

// Soft-critique or refinement session by mode name.
SessionResult run_session(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                          const std::string& mode, Strategy strategy, int max_turns, std::uint64_t seed);

void write_reports_csv(std::ostream& out, const std::vector<BenchmarkReport>& reports);

// One row of a report CSV.
struct ReportRow {
    std::string strategy;
    std::string mode;
    std::uint64_t seed = 0;
    int n = 0;
    double sr_at_n = 0.0;
    double avg_len = 0.0;
    double turns_to_n = 0.0;
    std::vector<double> hit_rate;
    std::size_t samples = 0;
};

std::vector<ReportRow> read_report_csv(std::istream& in);

// Same layout as write_reports_csv; aggregated rows name the seed column "runs".
void write_rows_csv(std::ostream& out, const std::vector<ReportRow>& rows, const std::string& seed_column = "seed");

// Means over seeds for every (strategy, mode, N).
std::vector<ReportRow> aggregate_rows(const std::vector<ReportRow>& rows);

}  // namespace convrec
