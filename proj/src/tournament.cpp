#include "courtsim/tournament.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "courtsim/csv.hpp"
#include "courtsim/rng.hpp"

namespace courtsim {

std::string_view to_string(Enumeration e) noexcept {
    return e == Enumeration::combinations ? "combinations" : "permutations";
}

Enumeration enumeration_from_string(std::string_view s) {
    if (s == "combinations") return Enumeration::combinations;
    if (s == "permutations") return Enumeration::permutations;
    throw std::invalid_argument("unknown enumeration \"" + std::string(s) + "\"");
}

void validate(const ExperimentConfig& c) {
    if (c.trait_count < 1) throw std::invalid_argument("trait_count must be >= 1");
    if (c.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (c.replications < 1) throw std::invalid_argument("replications must be >= 1");
    if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (c.backend_id.empty()) throw std::invalid_argument("backend_id must be set");
    validate(c.decoding);
}

std::string condition_label(const ExperimentConfig& c) {
    return fmt::format("{}_{}traits_{}rounds_{}", to_string(c.mode), c.trait_count, c.rounds, c.backend_id);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{{"mode", std::string(to_string(c.mode))},
                       {"trait_count", c.trait_count},
                       {"rounds", c.rounds},
                       {"backend_id", c.backend_id},
                       {"enumeration", std::string(to_string(c.enumeration))},
                       {"cases", c.cases},
                       {"traits", c.traits},
                       {"replications", c.replications},
                       {"seed", c.seed},
                       {"pairings_max", c.pairings_max},
                       {"workers", c.workers},
                       {"judge_sees_case", c.judge_sees_case},
                       {"include_parse_failures", c.include_parse_failures},
                       {"base_k", c.base_k},
                       {"initial_rating", c.initial_rating},
                       {"temperature", c.decoding.temperature},
                       {"top_p", c.decoding.top_p},
                       {"max_tokens", c.decoding.max_tokens}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (j.contains("mode")) c.mode = team_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("enumeration")) c.enumeration = enumeration_from_string(j.at("enumeration").get<std::string>());
    c.trait_count = j.value("trait_count", c.trait_count);
    c.rounds = j.value("rounds", c.rounds);
    c.backend_id = j.value("backend_id", c.backend_id);
    c.cases = j.value("cases", c.cases);
    c.traits = j.value("traits", c.traits);
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    c.pairings_max = j.value("pairings_max", c.pairings_max);
    c.workers = j.value("workers", c.workers);
    c.judge_sees_case = j.value("judge_sees_case", c.judge_sees_case);
    c.include_parse_failures = j.value("include_parse_failures", c.include_parse_failures);
    c.base_k = j.value("base_k", c.base_k);
    c.initial_rating = j.value("initial_rating", c.initial_rating);
    c.decoding.temperature = j.value("temperature", c.decoding.temperature);
    c.decoding.top_p = j.value("top_p", c.decoding.top_p);
    c.decoding.max_tokens = j.value("max_tokens", c.decoding.max_tokens);
}

std::vector<SweepItem> sweep(const ExperimentConfig& config, const CaseCorpus& corpus,
                             const std::vector<Trait>& taxonomy) {
    validate(config);

    std::vector<const Case*> cases;
    if (config.cases.empty()) {
        for (const auto& c : corpus.cases) cases.push_back(&c);
    } else {
        for (const auto& id : config.cases) cases.push_back(&corpus.find(id));
    }

    std::vector<std::string> names;
    if (config.traits.empty()) {
        names = trait_names(taxonomy);
    } else {
        const auto known = trait_names(taxonomy);
        for (const auto& t : config.traits) {
            if (std::find(known.begin(), known.end(), t) == known.end()) {
                throw std::invalid_argument("trait \"" + t + "\" is not in the taxonomy");
            }
        }
        names = config.traits;
    }
    const auto k = static_cast<std::size_t>(config.trait_count);
    const auto sets = config.enumeration == Enumeration::combinations ? enumerate_combinations(names, k)
                                                                      : enumerate_permutations(names, k);

    std::vector<std::pair<std::size_t, std::size_t>> pairings;
    pairings.reserve(sets.size() * sets.size());
    for (std::size_t p = 0; p < sets.size(); ++p) {
        for (std::size_t d = 0; d < sets.size(); ++d) pairings.emplace_back(p, d);
    }
    if (config.pairings_max > 0 && config.pairings_max < pairings.size()) {
        // Partial Fisher-Yates, then restore sweep order.
        Rng rng(derive_seed(config.seed, 0x7061697273ULL));
        for (std::size_t i = 0; i < config.pairings_max; ++i) {
            auto j = i + static_cast<std::size_t>(rng.below(pairings.size() - i));
            std::swap(pairings[i], pairings[j]);
        }
        pairings.resize(config.pairings_max);
        std::sort(pairings.begin(), pairings.end());
    }

    std::vector<SweepItem> items;
    items.reserve(cases.size() * pairings.size() * static_cast<std::size_t>(config.replications));
    std::int64_t index = 0;
    for (const Case* c : cases) {
        for (auto [p, d] : pairings) {
            for (int rep = 0; rep < config.replications; ++rep) {
                items.push_back(SweepItem{index, c->id, sets[p], sets[d], rep,
                                          derive_seed(config.seed, static_cast<std::uint64_t>(index))});
                ++index;
            }
        }
    }
    return items;
}

ReversalStats reversal_rate(const std::vector<ReplicatedSetup>& setups) {
    ReversalStats stats;
    std::map<int, std::int64_t> differing;
    for (const auto& s : setups) {
        if (s.labels.size() < 2) throw std::invalid_argument("a replicated setup needs at least 2 verdicts");
        stats.replications = std::max(stats.replications, static_cast<int>(s.labels.size()));
        for (std::size_t i = 1; i < s.labels.size(); ++i) {
            ++stats.comparisons_by_rounds[s.rounds];
            if (s.labels[i] != s.labels[0]) ++differing[s.rounds];
        }
    }
    for (const auto& [rounds, n] : stats.comparisons_by_rounds) {
        stats.rate_by_rounds[rounds] = static_cast<double>(differing[rounds]) / static_cast<double>(n);
    }
    return stats;
}

std::optional<Role> winner(const Verdict& v) noexcept {
    switch (v.label) {
        case VerdictLabel::not_guilty: return Role::defense;
        case VerdictLabel::guilty: return Role::prosecution;
        case VerdictLabel::undecided: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<SetupRow> top_setups(const std::vector<ConditionSummary>& conditions, PoolKind pool,
                                 std::size_t limit) {
    std::vector<SetupRow> rows;
    for (const auto& c : conditions) {
        auto ranked = rankings(c.pools.get(pool));
        if (ranked.empty()) continue;
        rows.push_back(SetupRow{c.label, c.mode, c.trait_count, c.rounds, c.backend_id, ranked.front().second,
                                ranked.front().first});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SetupRow& a, const SetupRow& b) {
        if (a.top_elo != b.top_elo) return a.top_elo > b.top_elo;
        return a.condition < b.condition;
    });
    if (limit > 0 && rows.size() > limit) rows.resize(limit);
    return rows;
}

std::map<std::string, double> trait_frequency_in_winners(const std::vector<TrialRecord>& records, Role side) {
    std::map<std::string, std::int64_t> counts;
    std::int64_t wins = 0;
    for (const auto& r : records) {
        if (!r.ok() || !r.transcript.verdict) continue;
        if (winner(*r.transcript.verdict) != side) continue;
        ++wins;
        const auto& traits = side == Role::defense ? r.config.defense : r.config.prosecution;
        std::set<std::string> unique(traits.traits.begin(), traits.traits.end());
        for (const auto& t : unique) ++counts[t];
    }
    std::map<std::string, double> freq;
    for (const auto& [t, n] : counts) freq[t] = static_cast<double>(n) / static_cast<double>(wins);
    return freq;
}

namespace {

bool counts_for_elo(const TrialRecord& r, bool include_parse_failures) {
    if (!r.ok() || !r.transcript.verdict) return false;
    return include_parse_failures || !r.transcript.parse_failure;
}

std::string traits_category(int k) { return k == 1 ? "1 Trait" : std::to_string(k) + " Traits"; }
std::string rounds_category(int n) { return n == 1 ? "1 Round" : std::to_string(n) + " Rounds"; }

std::string optional_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string{}; }

}  // namespace

void feed_elo(EloPools& pools, const std::vector<const TrialRecord*>& ordered, bool include_parse_failures) {
    for (const TrialRecord* r : ordered) {
        if (!counts_for_elo(*r, include_parse_failures)) continue;
        apply_trial(pools, MatchOutcome{*r->transcript.verdict, r->config.prosecution, r->config.defense},
                    r->trial_index);
    }
}

std::vector<ConditionSummary> summarize_conditions(const std::vector<TrialRecord>& records,
                                                   const ReportOptions& options) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const TrialRecord*>> grouped;
    for (const auto& r : records) {
        auto [it, inserted] = grouped.try_emplace(r.condition);
        if (inserted) order.push_back(r.condition);
        it->second.push_back(&r);
    }
    std::vector<ConditionSummary> out;
    for (const auto& label : order) {
        auto group = grouped[label];
        std::stable_sort(group.begin(), group.end(),
                         [](const TrialRecord* a, const TrialRecord* b) { return a->trial_index < b->trial_index; });
        const auto& first = *group.front();
        ConditionSummary s;
        s.label = label;
        s.mode = first.config.mode;
        s.trait_count = static_cast<int>(first.config.prosecution.size());
        s.rounds = first.config.rounds;
        s.backend_id = first.config.backend_id;
        s.pools = EloPools(options.base_k, options.initial_rating);
        feed_elo(s.pools, group, options.include_parse_failures);
        for (const auto* r : group) {
            ++s.n_trials;
            if (!r->ok()) {
                ++s.n_failed;
                continue;
            }
            if (r->transcript.parse_failure) ++s.n_parse_failures;
            if (!r->transcript.verdict) continue;
            auto w = winner(*r->transcript.verdict);
            if (w == Role::defense) {
                ++s.defense_wins;
            } else if (w == Role::prosecution) {
                ++s.prosecution_wins;
            } else {
                ++s.undecided;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ConditionSummary>& conditions) {
    struct Acc {
        double p_sum = 0, d_sum = 0;
        std::int64_t p_n = 0, d_n = 0, trials = 0, defense_wins = 0;
    };
    const std::vector<std::string> dimensions = {"mode", "model", "traits", "rounds"};
    std::vector<AggregateRow> rows;
    for (const auto& dim : dimensions) {
        std::vector<std::string> order;
        std::map<std::string, Acc> acc;
        std::map<std::string, int> sort_key;
        for (const auto& c : conditions) {
            std::string category;
            int key = 0;
            if (dim == "mode") {
                category = c.mode == TeamMode::single ? "Single" : "Team";
            } else if (dim == "model") {
                category = c.backend_id;
            } else if (dim == "traits") {
                category = traits_category(c.trait_count);
                key = c.trait_count;
            } else {
                category = rounds_category(c.rounds);
                key = c.rounds;
            }
            auto [it, inserted] = acc.try_emplace(category);
            if (inserted) {
                order.push_back(category);
                sort_key[category] = key;
            }
            auto& a = it->second;
            for (const auto& [_, rating] : c.pools.prosecution.ratings) {
                a.p_sum += rating;
                ++a.p_n;
            }
            for (const auto& [_, rating] : c.pools.defense.ratings) {
                a.d_sum += rating;
                ++a.d_n;
            }
            a.trials += c.n_trials;
            a.defense_wins += c.defense_wins;
        }
        std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
            if (sort_key[a] != sort_key[b]) return sort_key[a] < sort_key[b];
            return a < b;
        });
        for (const auto& category : order) {
            const auto& a = acc[category];
            AggregateRow row;
            row.dimension = dim;
            row.category = category;
            if (a.p_n) row.avg_prosecution_elo = a.p_sum / static_cast<double>(a.p_n);
            if (a.d_n) row.avg_defense_elo = a.d_sum / static_cast<double>(a.d_n);
            row.n_trials = a.trials;
            row.win_rate_defense =
                a.trials ? static_cast<double>(a.defense_wins) / static_cast<double>(a.trials) : 0.0;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::optional<ReversalStats> reversal_from_records(const std::vector<TrialRecord>& records) {
    using Key = std::tuple<std::string, std::string, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const TrialRecord*>> groups;
    for (const auto& r : records) {
        if (!r.ok() || !r.transcript.verdict) continue;
        Key key{r.condition, r.transcript.case_id, r.config.prosecution.fingerprint(),
                r.config.defense.fingerprint()};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(&r);
    }
    std::vector<ReplicatedSetup> setups;
    for (const auto& key : order) {
        auto group = groups[key];
        if (group.size() < 2) continue;
        std::stable_sort(group.begin(), group.end(),
                         [](const TrialRecord* a, const TrialRecord* b) { return a->replication < b->replication; });
        ReplicatedSetup s;
        s.rounds = group.front()->config.rounds;
        for (const auto* r : group) s.labels.push_back(r->transcript.verdict->label);
        setups.push_back(std::move(s));
    }
    if (setups.empty()) return std::nullopt;
    return reversal_rate(setups);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const CaseCorpus& corpus,
                                const std::vector<Trait>& taxonomy, const BackendRegistry& backends) {
    const auto items = sweep(config, corpus, taxonomy);
    if (!backends.contains(config.backend_id)) {
        throw std::invalid_argument("backend \"" + config.backend_id + "\" is not configured");
    }
    const auto label = condition_label(config);

    ExperimentResult result;
    result.config = config;
    result.pools = EloPools(config.base_k, config.initial_rating);
    result.records.resize(items.size());

    // Ordered collector: workers fill slots, the writer releases them by index.
    std::mutex mu;
    std::vector<bool> done(items.size(), false);
    std::size_t next_release = 0;
    std::atomic<std::size_t> next_item{0};
    std::exception_ptr failure;

    auto release_ready = [&] {
        while (next_release < items.size() && done[next_release]) {
            feed_elo(result.pools, {&result.records[next_release]}, config.include_parse_failures);
            ++next_release;
        }
    };

    auto worker = [&] {
        for (std::size_t i = next_item++; i < items.size(); i = next_item++) {
            const auto& item = items[i];
            TrialRecord record;
            try {
                TrialConfig tc{config.mode, item.prosecution, item.defense, config.rounds, config.backend_id,
                               item.seed,   config.judge_sees_case, config.decoding};
                record = run_trial(corpus.find(item.case_id), tc, backends);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
            record.condition = label;
            record.trial_index = item.trial_index;
            record.replication = item.replication;
            std::lock_guard lock(mu);
            result.records[i] = std::move(record);
            done[i] = true;
            release_ready();
        }
    };

    const auto width = std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(items.size(), 1));
    if (width <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < width; ++t) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    ReportOptions opts{config.include_parse_failures, config.base_k, config.initial_rating};
    result.aggregates = aggregate_rows(summarize_conditions(result.records, opts));
    result.reversal = reversal_from_records(result.records);
    return result;
}

std::map<std::string, std::string> render_reports(const std::vector<TrialRecord>& records,
                                                  const ReportOptions& options) {
    std::map<std::string, std::string> files;
    const auto conditions = summarize_conditions(records, options);

    for (const auto& c : conditions) {
        files["elo_" + c.label + ".csv"] = pools_csv(c.pools);
        std::ostringstream log;
        write_update_log(log, c.pools);
        files["elo_updates_" + c.label + ".jsonl"] = log.str();
    }

    std::string summary = csv_row({"condition", "n_trials", "n_failed", "n_parse_failures", "defense_wins",
                                   "prosecution_wins", "undecided"});
    for (const auto& c : conditions) {
        summary += csv_row({c.label, std::to_string(c.n_trials), std::to_string(c.n_failed),
                            std::to_string(c.n_parse_failures), std::to_string(c.defense_wins),
                            std::to_string(c.prosecution_wins), std::to_string(c.undecided)});
    }
    files["summary.csv"] = summary;

    const std::vector<std::pair<PoolKind, std::string>> tables = {
        {PoolKind::prosecution_role, "top_prosecution.csv"},
        {PoolKind::defense_role, "top_defense.csv"},
        {PoolKind::overall, "top_overall.csv"}};
    std::map<PoolKind, std::vector<SetupRow>> tops;
    for (const auto& [pool, name] : tables) {
        auto rows = top_setups(conditions, pool);
        std::string csv = csv_row({"rank", "mode", "traits", "rounds", "model", "top_elo", "best_trait"});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            csv += csv_row({std::to_string(i + 1), std::string(to_string(r.mode)), std::to_string(r.trait_count),
                            std::to_string(r.rounds), r.model, csv_number(r.top_elo), r.best_trait});
        }
        files[name] = csv;
        tops[pool] = std::move(rows);
    }

    // Best configuration per pool, with the trait's win rate in that role.
    std::string best = csv_row({"category", "mode", "traits", "rounds", "model", "best_trait", "elo", "win_rate"});
    const std::vector<std::pair<PoolKind, std::string>> categories = {
        {PoolKind::prosecution_role, "Best Prosecution"},
        {PoolKind::defense_role, "Best Defense"},
        {PoolKind::overall, "Best Overall"}};
    for (const auto& [pool, category] : categories) {
        const auto& rows = tops[pool];
        if (rows.empty()) continue;
        const auto& top = rows.front();
        std::string win_rate;
        if (pool != PoolKind::overall) {
            const Role side = pool == PoolKind::prosecution_role ? Role::prosecution : Role::defense;
            std::int64_t appearances = 0, wins = 0;
            for (const auto& r : records) {
                if (r.condition != top.condition || !counts_for_elo(r, options.include_parse_failures)) continue;
                const auto& traits = side == Role::prosecution ? r.config.prosecution : r.config.defense;
                if (!traits.contains(top.best_trait)) continue;
                ++appearances;
                if (winner(*r.transcript.verdict) == side) ++wins;
            }
            if (appearances) win_rate = csv_number(static_cast<double>(wins) / static_cast<double>(appearances));
        }
        best += csv_row({category, std::string(to_string(top.mode)), std::to_string(top.trait_count),
                         std::to_string(top.rounds), top.model, top.best_trait, csv_number(top.top_elo), win_rate});
    }
    files["best_configs.csv"] = best;

    std::string aggregate =
        csv_row({"dimension", "category", "avg_prosecution_elo", "avg_defense_elo", "win_rate_defense", "n_trials"});
    for (const auto& row : aggregate_rows(conditions)) {
        aggregate += csv_row({row.dimension, row.category, optional_number(row.avg_prosecution_elo),
                              optional_number(row.avg_defense_elo), csv_number(row.win_rate_defense),
                              std::to_string(row.n_trials)});
    }
    files["aggregate.csv"] = aggregate;

    std::string freq = csv_row({"side", "trait", "frequency"});
    for (Role side : {Role::prosecution, Role::defense}) {
        for (const auto& [trait, f] : trait_frequency_in_winners(records, side)) {
            freq += csv_row({std::string(to_string(side)), trait, csv_number(f)});
        }
    }
    files["trait_frequency.csv"] = freq;

    if (auto rev = reversal_from_records(records)) {
        std::string csv = csv_row({"rounds", "reversal_rate", "comparisons", "replications"});
        for (const auto& [rounds, rate] : rev->rate_by_rounds) {
            csv += csv_row({std::to_string(rounds), csv_number(rate), std::to_string(rev->comparisons_by_rounds[rounds]),
                            std::to_string(rev->replications)});
        }
        files["reversal.csv"] = csv;
    }
    return files;
}

void write_reports(const std::map<std::string, std::string>& reports, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, contents] : reports) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report " + (dir / name).string());
        out << contents;
    }
}

}  // namespace courtsim
