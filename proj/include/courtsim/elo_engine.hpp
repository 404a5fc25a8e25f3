#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "courtsim/agent_runtime.hpp"
#include "courtsim/trait_taxonomy.hpp"

namespace courtsim {

enum class PoolKind { overall, prosecution_role, defense_role };

std::string_view to_string(PoolKind k) noexcept;
PoolKind pool_kind_from_string(std::string_view s);

struct RatingUpdate {
    std::string trait;
    PoolKind pool = PoolKind::overall;
    double delta = 0;
    std::int64_t trial_index = 0;
    double k_effective = 0;
    double expected = 0;
    double observed = 0;
};

/// Trait ratings for one role scope. Unseen traits read as `initial_rating`.
struct EloPool {
    PoolKind kind = PoolKind::overall;
    std::map<std::string, double> ratings;
    double base_k = 32.0;
    double initial_rating = 1500.0;
    std::vector<RatingUpdate> update_log;

    double rating(const std::string& trait) const;
    std::size_t update_count(const std::string& trait) const;
};

/// Overall, prosecution-role and defense-role pools for one experimental condition.
struct EloPools {
    EloPool overall;
    EloPool prosecution;
    EloPool defense;

    EloPools() : EloPools(32.0, 1500.0) {}
    EloPools(double base_k, double initial_rating);

    EloPool& get(PoolKind kind);
    const EloPool& get(PoolKind kind) const;
};

struct MatchOutcome {
    Verdict verdict;
    TraitSet prosecution_traits;
    TraitSet defense_traits;
};

/// 1 / (1 + 10^((mean_p - mean_d) / 400)).
double expected_defense_score(double mean_p, double mean_d);

struct ObservedScores {
    double defense;
    double prosecution;
};

/// not_guilty -> (1, 0), guilty -> (0, 1), undecided -> (0.5, 0.5) as (defense, prosecution).
ObservedScores observed_scores(VerdictLabel label) noexcept;

/// base_k * (0.5 + confidence). Throws std::domain_error outside [0, 1].
double effective_k(double base_k, double confidence);

/// Simultaneous update of all three pools from pre-trial ratings. Side means
/// are taken within each pool. Returns the appended log entries.
std::vector<RatingUpdate> apply_trial(EloPools& pools, const MatchOutcome& outcome, std::int64_t trial_index);

/// Descending rating, ties broken by trait name.
std::vector<std::pair<std::string, double>> rankings(const EloPool& pool);

/// Folds the update log onto initial ratings, in log order.
std::map<std::string, double> replay_log(const EloPool& pool);

/// CSV with columns pool_kind,trait,rating,n_updates (all three pools, ranked).
std::string pools_csv(const EloPools& pools);
/// One JSON object per update.
void write_update_log(std::ostream& out, const EloPools& pools);

}  // namespace courtsim
