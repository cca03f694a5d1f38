#include "convrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "convrec/critique.hpp"
#include "convrec/justify.hpp"
#include "convrec/recsys.hpp"

namespace convrec {

Strategy parse_strategy(const std::string& name) {
    if (name == "random") return Strategy::Random;
    if (name == "pop") return Strategy::Pop;
    if (name == "diff") return Strategy::Diff;
    throw InvalidInput("unknown strategy \"" + name + "\" (expected random, pop or diff)");
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Pop: return "pop";
        case Strategy::Diff: return "diff";
    }
    return "?";
}

RefineMode parse_refine_mode(const std::string& name) {
    if (name == "query") return RefineMode::Query;
    if (name == "filter") return RefineMode::Filter;
    if (name == "filter_rerank") return RefineMode::FilterRerank;
    throw InvalidInput("unknown refinement mode \"" + name + "\"");
}

std::string to_string(RefineMode mode) {
    switch (mode) {
        case RefineMode::Query: return "query";
        case RefineMode::Filter: return "filter";
        case RefineMode::FilterRerank: return "filter_rerank";
    }
    return "?";
}

std::optional<int> user_strategy_select(Strategy strategy, const AspectSet& justification,
                                        const Eigen::Ref<const Vector>& goal_profile,
                                        const Eigen::Ref<const Vector>& current_item_freq,
                                        const Eigen::Ref<const Vector>& goal_freq,
                                        const std::vector<double>& popularity, const AspectSet& critiqued,
                                        std::mt19937_64& rng) {
    const AspectSet valid = valid_critiques(justification, goal_profile, critiqued);
    if (valid.empty()) return std::nullopt;
    switch (strategy) {
        case Strategy::Random: {
            std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
            return valid[pick(rng)];
        }
        case Strategy::Pop:
            return argmax_over(valid, popularity);
        case Strategy::Diff: {
            std::vector<double> diff(static_cast<std::size_t>(goal_profile.size()), 0.0);
            for (int a : valid) diff[a] = current_item_freq[a] - goal_freq[a];
            return argmax_over(valid, diff);
        }
    }
    return std::nullopt;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::optional<int> choose_critique(Strategy strategy, const AspectSet& justification, const AspectContext& ctx,
                                   int current, int goal, const AspectSet& critiqued, std::mt19937_64& rng) {
    return user_strategy_select(strategy, justification, ctx.item_presence.row(goal).transpose(),
                                ctx.item_freq.row(current).transpose(), ctx.item_freq.row(goal).transpose(),
                                ctx.popularity, critiqued, rng);
}

void check_session_args(const ExpertModel& model, int user, int goal, int max_turns) {
    if (user < 0 || user >= model.n_users()) throw InvalidInput("session: user out of range");
    if (goal < 0 || goal >= model.n_items()) throw InvalidInput("session: goal out of range");
    if (max_turns < 1) throw InvalidInput("session: max_turns must be >= 1");
}

}  // namespace

SessionResult simulate_session(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                               Strategy strategy, int max_turns, std::uint64_t seed) {
    check_session_args(model, user, goal, max_turns);
    std::mt19937_64 rng(seed);
    const Vector base = model.user_base.row(user);
    const Vector freq = ctx.user_freq.row(user);
    CritiqueState state = CritiqueState::initial(freq);
    std::vector<int> excluded;

    SessionResult r;
    r.user = user;
    r.goal = goal;
    for (int t = 1; t <= max_turns; ++t) {
        const Vector gamma = apply_critique(base, state, model.encoder, model.fusion);
        const Vector scores = model.scores(gamma);
        const ItemList ranking = rank_items(scores, excluded);
        if (ranking.empty()) break;
        TurnRecord turn;
        turn.turn = t;
        turn.item = ranking.front();
        turn.goal_rank = rank_of(scores, goal, excluded);
        turn.justification = emit_justification(model.aspect_probs(gamma, turn.item), JustifyMode::Deterministic);
        r.goal_ranks.push_back(turn.goal_rank);
        r.turns = t;
        if (turn.item == goal) {
            r.success = true;
            r.transcript.push_back(std::move(turn));
            break;
        }
        turn.critique = choose_critique(strategy, turn.justification, ctx, turn.item, goal, state.critiqued, rng);
        if (turn.critique) state = update_critique_state(state, CritiqueMask::single(*turn.critique), freq);
        excluded.push_back(turn.item);
        r.transcript.push_back(std::move(turn));
    }
    if (!r.success) r.turns = max_turns;
    return r;
}

BenchmarkReport compute_metrics(const std::vector<SessionResult>& results, const std::vector<int>& n_grid,
                                int max_turns) {
    if (results.empty()) throw InvalidInput("compute_metrics: no session results");
    if (max_turns < 1) throw InvalidInput("compute_metrics: max_turns must be >= 1");
    BenchmarkReport rep;
    rep.max_turns = max_turns;
    rep.samples = results.size();
    rep.n_grid = n_grid;
    const double n = static_cast<double>(results.size());

    for (int cutoff : n_grid) {
        double reached = 0.0;
        double first_turn_sum = 0.0;
        for (const auto& r : results) {
            for (std::size_t t = 0; t < r.goal_ranks.size(); ++t) {
                if (r.goal_ranks[t] >= 1 && r.goal_ranks[t] <= cutoff) {
                    reached += 1.0;
                    first_turn_sum += static_cast<double>(t + 1);
                    break;
                }
            }
        }
        rep.sr_at_n.push_back(reached / n);
        rep.turns_to_n.push_back(reached > 0 ? first_turn_sum / reached : std::numeric_limits<double>::quiet_NaN());
    }

    double length = 0.0;
    rep.hit_rate_by_turn.assign(static_cast<std::size_t>(max_turns), 0.0);
    for (const auto& r : results) {
        length += r.success ? r.turns : max_turns;
        if (r.success) {
            for (int t = std::max(r.turns, 1); t <= max_turns; ++t) rep.hit_rate_by_turn[t - 1] += 1.0;
        }
    }
    rep.avg_length = length / n;
    for (auto& h : rep.hit_rate_by_turn) h /= n;
    return rep;
}

std::optional<int> select_query_aspect(const ItemList& candidates, const Matrix& item_presence) {
    if (candidates.size() < 2) throw InvalidInput("select_query_aspect: need at least two candidates");
    std::optional<int> best;
    long best_gap = 0;
    const long n = static_cast<long>(candidates.size());
    for (int a = 0; a < item_presence.cols(); ++a) {
        long pos = 0;
        for (int i : candidates) pos += item_presence(i, a) != 0 ? 1 : 0;
        if (pos == 0 || pos == n) continue;
        const long gap = std::labs(pos - (n - pos));
        if (!best || gap < best_gap) {
            best = a;
            best_gap = gap;
        }
    }
    return best;
}

ItemList apply_hard_feedback(const ItemList& candidates, int aspect, Polarity polarity, const Matrix& item_presence) {
    if (aspect < 0 || aspect >= item_presence.cols()) throw InvalidInput("apply_hard_feedback: aspect out of range");
    ItemList out;
    for (int i : candidates) {
        const bool has = item_presence(i, aspect) != 0;
        if (has == (polarity == Polarity::Keep)) out.push_back(i);
    }
    return out;
}

SessionResult run_refinement_session(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                                     RefineMode mode, int max_turns, std::uint64_t seed, Strategy strategy) {
    check_session_args(model, user, goal, max_turns);
    std::mt19937_64 rng(seed);
    const Vector base = model.user_base.row(user);
    const Vector freq = ctx.user_freq.row(user);
    CritiqueState state = CritiqueState::initial(freq);
    Vector gamma = apply_critique(base, state, model.encoder, model.fusion);
    ItemList candidates = rank_items(model.scores(gamma));

    SessionResult r;
    r.user = user;
    r.goal = goal;
    for (int t = 1; t <= max_turns && !candidates.empty(); ++t) {
        TurnRecord turn;
        turn.turn = t;
        turn.item = candidates.front();
        auto at = std::find(candidates.begin(), candidates.end(), goal);
        turn.goal_rank = at == candidates.end() ? model.n_items() + 1 : static_cast<int>(at - candidates.begin()) + 1;
        r.goal_ranks.push_back(turn.goal_rank);
        r.turns = t;
        if (mode != RefineMode::Query) {
            turn.justification = emit_justification(model.aspect_probs(gamma, turn.item), JustifyMode::Deterministic);
        }
        if (turn.item == goal) {
            r.success = true;
            r.transcript.push_back(std::move(turn));
            break;
        }
        ItemList remaining(candidates.begin() + 1, candidates.end());
        if (mode == RefineMode::Query) {
            if (remaining.size() >= 2) {
                if (auto a = select_query_aspect(remaining, ctx.item_presence)) {
                    const bool yes = ctx.item_presence(goal, *a) != 0;
                    turn.critique = *a;
                    turn.answer = yes;
                    remaining = apply_hard_feedback(remaining, *a, yes ? Polarity::Keep : Polarity::Drop,
                                                    ctx.item_presence);
                }
            }
        } else {
            turn.critique = choose_critique(strategy, turn.justification, ctx, turn.item, goal, state.critiqued, rng);
            if (turn.critique) {
                ItemList pruned = apply_hard_feedback(remaining, *turn.critique, Polarity::Drop, ctx.item_presence);
                if (!pruned.empty()) remaining = std::move(pruned);
                if (mode == RefineMode::FilterRerank) {
                    state = update_critique_state(state, CritiqueMask::single(*turn.critique), freq);
                    gamma = apply_critique(base, state, model.encoder, model.fusion);
                    const Vector scores = model.scores(gamma);
                    std::stable_sort(remaining.begin(), remaining.end(), [&](int a, int b) {
                        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
                } else {
                    state.critiqued.insert(
                        std::lower_bound(state.critiqued.begin(), state.critiqued.end(), *turn.critique),
                        *turn.critique);
                }
            }
        }
        candidates = std::move(remaining);
        r.transcript.push_back(std::move(turn));
    }
    if (!r.success) r.turns = max_turns;
    return r;
}

std::vector<std::pair<int, int>> sample_pairs(const InteractionSet& set, std::size_t n, std::uint64_t seed) {
    auto pairs = set.pairs();
    std::mt19937_64 rng(seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    if (pairs.size() > n) pairs.resize(n);
    return pairs;
}

SessionResult run_session(const ExpertModel& model, const AspectContext& ctx, int user, int goal,
                          const std::string& mode, Strategy strategy, int max_turns, std::uint64_t seed) {
    if (mode == "critique") return simulate_session(model, ctx, user, goal, strategy, max_turns, seed);
    return run_refinement_session(model, ctx, user, goal, parse_refine_mode(mode), max_turns, seed, strategy);
}

std::vector<BenchmarkReport> run_benchmark(const ExpertModel& model, const AspectContext& ctx,
                                           const InteractionSet& test, const BenchmarkSpec& spec,
                                           std::vector<std::vector<SessionResult>>* sessions) {
    if (spec.seeds.empty() || spec.modes.empty()) throw InvalidInput("run_benchmark: empty sweep");
    std::vector<BenchmarkReport> reports;
    for (const auto& mode : spec.modes) {
        if (mode != "critique") parse_refine_mode(mode);
        std::vector<std::optional<Strategy>> strategies;
        if (mode == "query") {
            strategies.push_back(std::nullopt);
        } else {
            for (auto s : spec.strategies) strategies.push_back(s);
        }
        for (const auto& strategy : strategies) {
            for (const auto seed : spec.seeds) {
                const auto pairs = sample_pairs(test, spec.n_pairs, seed);
                if (pairs.empty()) throw InvalidInput("run_benchmark: test set is empty");
                std::vector<SessionResult> results(pairs.size());
                auto work = [&](std::size_t begin, std::size_t step) {
                    for (std::size_t k = begin; k < pairs.size(); k += step) {
                        results[k] = run_session(model, ctx, pairs[k].first, pairs[k].second, mode,
                                                 strategy.value_or(Strategy::Pop), spec.max_turns,
                                                 splitmix(seed * 1000003ULL + k));
                    }
                };
                const unsigned threads = std::max(1u, spec.threads);
                if (threads == 1) {
                    work(0, 1);
                } else {
                    std::vector<std::jthread> pool;
                    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
                }
                BenchmarkReport rep = compute_metrics(results, spec.n_grid, spec.max_turns);
                rep.strategy = strategy ? to_string(*strategy) : "none";
                rep.mode = mode;
                rep.seed = seed;
                reports.push_back(std::move(rep));
                if (sessions) sessions->push_back(std::move(results));
            }
        }
    }
    return reports;
}

namespace {

std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_num(const std::string& s) {
    if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

}  // namespace

void write_reports_csv(std::ostream& out, const std::vector<BenchmarkReport>& reports) {
    const int turns = reports.empty() ? 0 : reports.front().max_turns;
    out << "strategy,mode,seed,N,sr_at_n,avg_len,turns_to_n";
    for (int t = 1; t <= turns; ++t) out << ",hit_rate_t" << t;
    out << ",samples,turns_to_n_basis\n";
    for (const auto& r : reports) {
        if (r.max_turns != turns) throw InvalidInput("write_reports_csv: reports disagree on the turn limit");
        for (std::size_t k = 0; k < r.n_grid.size(); ++k) {
            out << r.strategy << ',' << r.mode << ',' << r.seed << ',' << r.n_grid[k] << ',' << fmt_num(r.sr_at_n[k])
                << ',' << fmt_num(r.avg_length) << ',' << fmt_num(r.turns_to_n[k]);
            for (double h : r.hit_rate_by_turn) out << ',' << fmt_num(h);
            out << ',' << r.samples << ",sessions_reaching_n\n";
        }
    }
}

void write_rows_csv(std::ostream& out, const std::vector<ReportRow>& rows, const std::string& seed_column) {
    const std::size_t turns = rows.empty() ? 0 : rows.front().hit_rate.size();
    out << "strategy,mode," << seed_column << ",N,sr_at_n,avg_len,turns_to_n";
    for (std::size_t t = 1; t <= turns; ++t) out << ",hit_rate_t" << t;
    out << ",samples,turns_to_n_basis\n";
    for (const auto& r : rows) {
        if (r.hit_rate.size() != turns) throw InvalidInput("write_rows_csv: rows disagree on the turn limit");
        out << r.strategy << ',' << r.mode << ',' << r.seed << ',' << r.n << ',' << fmt_num(r.sr_at_n) << ','
            << fmt_num(r.avg_len) << ',' << fmt_num(r.turns_to_n);
        for (double h : r.hit_rate) out << ',' << fmt_num(h);
        out << ',' << r.samples << ",sessions_reaching_n\n";
    }
}

std::vector<ReportRow> read_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("report CSV is empty");
    const auto header = split_csv(line);
    std::map<std::string, std::size_t> col;
    std::vector<std::size_t> hit_cols;
    for (std::size_t k = 0; k < header.size(); ++k) {
        col[header[k]] = k;
        if (header[k].rfind("hit_rate_t", 0) == 0) hit_cols.push_back(k);
    }
    for (const char* need : {"strategy", "mode", "seed", "N", "sr_at_n", "avg_len", "turns_to_n"}) {
        if (!col.contains(need)) throw InvalidInput(std::string("report CSV lacks column ") + need);
    }
    std::vector<ReportRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) {
            throw InvalidInput("report CSV line " + std::to_string(line_no) + " has the wrong number of cells");
        }
        ReportRow row;
        row.strategy = cells[col["strategy"]];
        row.mode = cells[col["mode"]];
        row.seed = std::stoull(cells[col["seed"]]);
        row.n = std::stoi(cells[col["N"]]);
        row.sr_at_n = parse_num(cells[col["sr_at_n"]]);
        row.avg_len = parse_num(cells[col["avg_len"]]);
        row.turns_to_n = parse_num(cells[col["turns_to_n"]]);
        for (auto c : hit_cols) row.hit_rate.push_back(parse_num(cells[c]));
        if (col.contains("samples")) row.samples = std::stoull(cells[col["samples"]]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ReportRow> aggregate_rows(const std::vector<ReportRow>& rows) {
    struct Acc {
        ReportRow sum;
        std::size_t runs = 0;
        std::size_t turns_runs = 0;
    };
    std::vector<std::tuple<std::string, std::string, int>> order;
    std::map<std::tuple<std::string, std::string, int>, Acc> groups;
    for (const auto& r : rows) {
        auto key = std::make_tuple(r.strategy, r.mode, r.n);
        auto [it, inserted] = groups.try_emplace(key);
        Acc& acc = it->second;
        if (inserted) {
            order.push_back(key);
            acc.sum.strategy = r.strategy;
            acc.sum.mode = r.mode;
            acc.sum.n = r.n;
            acc.sum.hit_rate.assign(r.hit_rate.size(), 0.0);
        }
        if (acc.sum.hit_rate.size() != r.hit_rate.size()) throw InvalidInput("report rows disagree on the turn limit");
        acc.runs += 1;
        acc.sum.sr_at_n += r.sr_at_n;
        acc.sum.avg_len += r.avg_len;
        acc.sum.samples += r.samples;
        if (!std::isnan(r.turns_to_n)) {
            acc.sum.turns_to_n += r.turns_to_n;
            acc.turns_runs += 1;
        }
        for (std::size_t t = 0; t < r.hit_rate.size(); ++t) acc.sum.hit_rate[t] += r.hit_rate[t];
    }
    std::vector<ReportRow> out;
    for (const auto& key : order) {
        const Acc& acc = groups.at(key);
        ReportRow m = acc.sum;
        const double runs = static_cast<double>(acc.runs);
        m.seed = acc.runs;  // number of runs averaged
        m.sr_at_n /= runs;
        m.avg_len /= runs;
        m.turns_to_n = acc.turns_runs ? m.turns_to_n / static_cast<double>(acc.turns_runs)
                                      : std::numeric_limits<double>::quiet_NaN();
        for (auto& h : m.hit_rate) h /= runs;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace convrec
