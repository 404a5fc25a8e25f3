#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "courtsim/agent_runtime.hpp"
#include "courtsim/case_model.hpp"
#include "courtsim/debate_protocol.hpp"
#include "courtsim/elo_engine.hpp"
#include "courtsim/trait_taxonomy.hpp"

namespace courtsim {

enum class Enumeration { combinations, permutations };

std::string_view to_string(Enumeration e) noexcept;
Enumeration enumeration_from_string(std::string_view s);

/// One experimental condition (mode, trait count, rounds, backend) swept over
/// cases and trait-set pairings.
struct ExperimentConfig {
    TeamMode mode = TeamMode::single;
    int trait_count = 1;
    int rounds = 1;
    std::string backend_id = "scripted";
    Enumeration enumeration = Enumeration::combinations;
    std::vector<std::string> cases;   // empty: whole corpus
    std::vector<std::string> traits;  // empty: whole taxonomy
    int replications = 1;
    std::uint64_t seed = 0;
    std::size_t pairings_max = 0;  // 0: full cross product
    int workers = 1;
    bool judge_sees_case = true;
    bool include_parse_failures = true;
    double base_k = 32.0;
    double initial_rating = 1500.0;
    DecodingParams decoding;
};

/// Throws std::invalid_argument on trait_count/rounds/replications/workers < 1.
void validate(const ExperimentConfig& config);
/// e.g. "team_2traits_3rounds_gemini-2.5-pro".
std::string condition_label(const ExperimentConfig& config);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct SweepItem {
    std::int64_t trial_index = 0;
    std::string case_id;
    TraitSet prosecution;
    TraitSet defense;
    int replication = 0;
    std::uint64_t seed = 0;

    bool operator==(const SweepItem&) const = default;
};

/// Deterministic trial list: case-major, then pairing, then replication.
/// Per-trial seeds derive from (config seed, trial index).
std::vector<SweepItem> sweep(const ExperimentConfig& config, const CaseCorpus& corpus,
                             const std::vector<Trait>& taxonomy);

struct AggregateRow {
    std::string dimension;  // mode, model, traits, rounds
    std::string category;
    std::optional<double> avg_prosecution_elo;
    std::optional<double> avg_defense_elo;
    double win_rate_defense = 0;
    std::int64_t n_trials = 0;
};

struct ReversalStats {
    std::map<int, double> rate_by_rounds;
    std::map<int, std::int64_t> comparisons_by_rounds;
    int replications = 0;
};

struct ReplicatedSetup {
    int rounds = 1;
    std::vector<VerdictLabel> labels;  // first entry is the reference run
};

/// Runs 2..m are compared to run 1; rate = differing / comparisons, pooled per
/// rounds value. Throws std::invalid_argument on a setup with fewer than 2 labels.
ReversalStats reversal_rate(const std::vector<ReplicatedSetup>& setups);

/// Final pools and counts for one condition.
struct ConditionSummary {
    std::string label;
    TeamMode mode = TeamMode::single;
    int trait_count = 1;
    int rounds = 1;
    std::string backend_id;
    EloPools pools;
    std::int64_t n_trials = 0;
    std::int64_t n_failed = 0;
    std::int64_t n_parse_failures = 0;
    std::int64_t defense_wins = 0;
    std::int64_t prosecution_wins = 0;
    std::int64_t undecided = 0;
};

struct SetupRow {
    std::string condition;
    TeamMode mode = TeamMode::single;
    int trait_count = 1;
    int rounds = 1;
    std::string model;
    double top_elo = 0;
    std::string best_trait;
};

/// Best trait per condition in `pool`, conditions ranked by that rating.
std::vector<SetupRow> top_setups(const std::vector<ConditionSummary>& conditions, PoolKind pool,
                                 std::size_t limit = 0);

/// Side that won the trial: defense on not_guilty, prosecution on guilty.
std::optional<Role> winner(const Verdict& v) noexcept;

/// Share of the side's wins whose trait set contains each trait.
std::map<std::string, double> trait_frequency_in_winners(const std::vector<TrialRecord>& records, Role side);

std::vector<AggregateRow> aggregate_rows(const std::vector<ConditionSummary>& conditions);

struct ReportOptions {
    bool include_parse_failures = true;
    double base_k = 32.0;
    double initial_rating = 1500.0;
};

/// Feeds ok records to the Elo writer in trial-index order.
void feed_elo(EloPools& pools, const std::vector<const TrialRecord*>& ordered, bool include_parse_failures);

/// Groups records by condition (first-appearance order) and folds each into pools.
std::vector<ConditionSummary> summarize_conditions(const std::vector<TrialRecord>& records,
                                                   const ReportOptions& options = {});

std::optional<ReversalStats> reversal_from_records(const std::vector<TrialRecord>& records);

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<TrialRecord> records;
    EloPools pools;
    std::vector<AggregateRow> aggregates;
    std::optional<ReversalStats> reversal;
};

/// Runs the sweep on a bounded worker pool. Completed trials are released to
/// the Elo writer strictly in trial-index order.
ExperimentResult run_experiment(const ExperimentConfig& config, const CaseCorpus& corpus,
                                const std::vector<Trait>& taxonomy, const BackendRegistry& backends);

/// Report file name -> contents. Pure function of the records.
std::map<std::string, std::string> render_reports(const std::vector<TrialRecord>& records,
                                                  const ReportOptions& options = {});
void write_reports(const std::map<std::string, std::string>& reports, const std::filesystem::path& dir);

}  // namespace courtsim
