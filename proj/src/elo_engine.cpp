#include "courtsim/elo_engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "courtsim/csv.hpp"

namespace courtsim {

std::string_view to_string(PoolKind k) noexcept {
    switch (k) {
        case PoolKind::overall: return "overall";
        case PoolKind::prosecution_role: return "prosecution";
        case PoolKind::defense_role: return "defense";
    }
    return "overall";
}

PoolKind pool_kind_from_string(std::string_view s) {
    if (s == "overall") return PoolKind::overall;
    if (s == "prosecution" || s == "prosecution_role") return PoolKind::prosecution_role;
    if (s == "defense" || s == "defense_role") return PoolKind::defense_role;
    throw std::invalid_argument("unknown pool \"" + std::string(s) + "\"");
}

double EloPool::rating(const std::string& trait) const {
    auto it = ratings.find(trait);
    return it == ratings.end() ? initial_rating : it->second;
}

std::size_t EloPool::update_count(const std::string& trait) const {
    return static_cast<std::size_t>(std::count_if(update_log.begin(), update_log.end(),
                                                  [&](const RatingUpdate& u) { return u.trait == trait; }));
}

EloPools::EloPools(double base_k, double initial_rating) {
    overall.kind = PoolKind::overall;
    prosecution.kind = PoolKind::prosecution_role;
    defense.kind = PoolKind::defense_role;
    for (auto* p : {&overall, &prosecution, &defense}) {
        p->base_k = base_k;
        p->initial_rating = initial_rating;
    }
}

EloPool& EloPools::get(PoolKind kind) {
    switch (kind) {
        case PoolKind::overall: return overall;
        case PoolKind::prosecution_role: return prosecution;
        case PoolKind::defense_role: return defense;
    }
    return overall;
}

const EloPool& EloPools::get(PoolKind kind) const { return const_cast<EloPools*>(this)->get(kind); }

double expected_defense_score(double mean_p, double mean_d) {
    return 1.0 / (1.0 + std::pow(10.0, (mean_p - mean_d) / 400.0));
}

ObservedScores observed_scores(VerdictLabel label) noexcept {
    switch (label) {
        case VerdictLabel::not_guilty: return {1.0, 0.0};
        case VerdictLabel::guilty: return {0.0, 1.0};
        case VerdictLabel::undecided: return {0.5, 0.5};
    }
    return {0.5, 0.5};
}

double effective_k(double base_k, double confidence) {
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw std::domain_error("confidence must lie in [0, 1]");
    }
    return base_k * (0.5 + confidence);
}

namespace {

double side_mean(const EloPool& pool, const TraitSet& traits) {
    double sum = 0;
    for (const auto& t : traits.traits) sum += pool.rating(t);
    return sum / static_cast<double>(traits.size());
}

}  // namespace

std::vector<RatingUpdate> apply_trial(EloPools& pools, const MatchOutcome& outcome, std::int64_t trial_index) {
    validate_trait_set(outcome.prosecution_traits);
    validate_trait_set(outcome.defense_traits);
    const auto scores = observed_scores(outcome.verdict.label);

    std::vector<RatingUpdate> all;
    for (PoolKind kind : {PoolKind::overall, PoolKind::prosecution_role, PoolKind::defense_role}) {
        EloPool& pool = pools.get(kind);
        const double k = effective_k(pool.base_k, outcome.verdict.confidence);
        const double e_d = expected_defense_score(side_mean(pool, outcome.prosecution_traits),
                                                  side_mean(pool, outcome.defense_traits));
        const double e_p = 1.0 - e_d;

        std::vector<RatingUpdate> updates;
        if (kind != PoolKind::defense_role) {
            for (const auto& t : outcome.prosecution_traits.traits) {
                updates.push_back({t, kind, k * (scores.prosecution - e_p), trial_index, k, e_p, scores.prosecution});
            }
        }
        if (kind != PoolKind::prosecution_role) {
            for (const auto& t : outcome.defense_traits.traits) {
                updates.push_back({t, kind, k * (scores.defense - e_d), trial_index, k, e_d, scores.defense});
            }
        }
        // Deltas were all computed from the snapshot above; now commit.
        for (const auto& u : updates) {
            auto [it, _] = pool.ratings.try_emplace(u.trait, pool.initial_rating);
            it->second += u.delta;
            pool.update_log.push_back(u);
        }
        all.insert(all.end(), updates.begin(), updates.end());
    }
    return all;
}

std::vector<std::pair<std::string, double>> rankings(const EloPool& pool) {
    std::vector<std::pair<std::string, double>> out(pool.ratings.begin(), pool.ratings.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::map<std::string, double> replay_log(const EloPool& pool) {
    std::map<std::string, double> ratings;
    for (const auto& u : pool.update_log) {
        auto [it, _] = ratings.try_emplace(u.trait, pool.initial_rating);
        it->second += u.delta;
    }
    return ratings;
}

std::string pools_csv(const EloPools& pools) {
    std::string out = csv_row({"pool_kind", "trait", "rating", "n_updates"});
    for (PoolKind kind : {PoolKind::overall, PoolKind::prosecution_role, PoolKind::defense_role}) {
        const auto& pool = pools.get(kind);
        std::map<std::string, std::size_t> counts;
        for (const auto& u : pool.update_log) ++counts[u.trait];
        for (const auto& [trait, rating] : rankings(pool)) {
            out += csv_row({std::string(to_string(kind)), trait, csv_number(rating), std::to_string(counts[trait])});
        }
    }
    return out;
}

void write_update_log(std::ostream& out, const EloPools& pools) {
    for (PoolKind kind : {PoolKind::overall, PoolKind::prosecution_role, PoolKind::defense_role}) {
        for (const auto& u : pools.get(kind).update_log) {
            out << nlohmann::json{{"trial_index", u.trial_index},
                                  {"pool", std::string(to_string(u.pool))},
                                  {"trait", u.trait},
                                  {"delta", u.delta},
                                  {"k_effective", u.k_effective},
                                  {"expected", u.expected},
                                  {"observed", u.observed}}
                       .dump()
                << '\n';
        }
    }
}

}  // namespace courtsim
