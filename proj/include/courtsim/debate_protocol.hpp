#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "courtsim/agent_runtime.hpp"
#include "courtsim/case_model.hpp"
#include "courtsim/trait_taxonomy.hpp"

namespace courtsim {

/// single: one agent per side holding the whole trait set.
/// team: one agent per trait.
enum class TeamMode { single, team };

std::string_view to_string(TeamMode m) noexcept;
TeamMode team_mode_from_string(std::string_view s);

struct Team {
    Role role = Role::prosecution;
    std::vector<AgentConfig> members;
    std::size_t rotation_index = 0;
};

Team make_team(Role role, const TraitSet& traits, TeamMode mode, const std::string& backend_id,
               DecodingParams decoding = {});

/// Current member by rotation, then advances the rotation.
std::size_t next_speaker(Team& team);

struct Utterance {
    int index = 0;  // position in the discourse history
    int speaker = 0;
    Role side = Role::prosecution;
    Phase phase = Phase::opening;
    int round = 0;
    std::optional<std::string> issue;
    int responds_to = -1;  // history index of the opposing utterance in context, -1 if none
    std::string text;

    bool operator==(const Utterance&) const = default;
};

struct ArgumentCell {
    int round = 0;
    std::string issue;
    const Utterance* prosecution = nullptr;
    const Utterance* defense = nullptr;
};

/// Append-only discourse history of one trial plus the judge's decision.
struct Transcript {
    std::string case_id;
    std::vector<Utterance> history;
    std::optional<Verdict> verdict;
    int judge_attempts = 0;
    bool parse_failure = false;

    std::vector<const Utterance*> openings() const;
    std::vector<const Utterance*> arguments() const;
    std::vector<const Utterance*> summaries() const;
    /// Per (round, issue) pairs in protocol order.
    std::vector<ArgumentCell> cells() const;

    bool operator==(const Transcript&) const = default;
};

/// Everything needed to replay a trial on the scripted backend.
struct TrialConfig {
    TeamMode mode = TeamMode::single;
    TraitSet prosecution;
    TraitSet defense;
    int rounds = 1;
    std::string backend_id;
    std::uint64_t seed = 0;
    bool judge_sees_case = true;
    DecodingParams decoding;

    bool operator==(const TrialConfig&) const = default;
};

struct PhaseTiming {
    double opening_ms = 0;
    double argument_ms = 0;
    double summary_ms = 0;
    double deliberation_ms = 0;
};

struct TrialRecord {
    std::string condition;
    std::int64_t trial_index = 0;
    int replication = 0;
    std::string case_name;
    TrialConfig config;
    Transcript transcript;
    PhaseTiming timing;  // not persisted with the record
    std::optional<std::string> error;

    bool ok() const noexcept { return !error.has_value(); }
};

struct TrialOptions {
    bool judge_sees_case = true;
    int max_judge_attempts = 3;
};

/// The opposing side's most recent argument on `issue`, else its opening.
const Utterance* opposing_context(const Transcript& transcript, Role side, const std::string& issue);

GenerationRequest build_opening_request(const Case& c, const AgentConfig& speaker, int turn);

/// Request for one argument slot: case context, issue, the opposing reference
/// from `opposing_context`, and the instruction to argue this side's position.
GenerationRequest build_argument_context(const Case& c, const Transcript& transcript,
                                         const AgentConfig& speaker, Role side, int round,
                                         const std::string& issue, int turn);

/// Request for a team summary; includes all of that team's prior utterances.
GenerationRequest build_summary_request(const Case& c, const Transcript& transcript,
                                        const AgentConfig& speaker, Role side, int turn);

struct DeliberationResult {
    Verdict verdict;
    int attempts = 0;
    bool parse_failure = false;
};

/// Judge reads both summaries (prosecution first). Up to `max_attempts`
/// generations with an increasingly explicit format reminder, then
/// (undecided, 0.0). Backend errors propagate.
DeliberationResult deliberate(const Case& c, const Utterance& prosecution_summary,
                              const Utterance& defense_summary, const AgentConfig& judge,
                              Backend& backend, std::optional<std::uint64_t> seed, int first_turn,
                              const TrialOptions& options = {});

/// Runs openings, `n_rounds` rounds over every issue, summaries and deliberation.
/// A backend failure ends the trial early; the partial transcript is kept and
/// `error` is set.
TrialRecord run_trial(const Case& c, Team prosecution, Team defense, int n_rounds, const AgentConfig& judge,
                      const BackendRegistry& backends, std::uint64_t seed, const TrialOptions& options = {});

/// Builds teams and judge from a config snapshot and runs the trial.
TrialRecord run_trial(const Case& c, const TrialConfig& config, const BackendRegistry& backends);

}  // namespace courtsim
