#include "courtsim/debate_protocol.hpp"

#include <chrono>
#include <stdexcept>

namespace courtsim {

std::string_view to_string(TeamMode m) noexcept { return m == TeamMode::single ? "single" : "team"; }

TeamMode team_mode_from_string(std::string_view s) {
    if (s == "single") return TeamMode::single;
    if (s == "team") return TeamMode::team;
    throw std::invalid_argument("unknown mode \"" + std::string(s) + "\" (expected single or team)");
}

Team make_team(Role role, const TraitSet& traits, TeamMode mode, const std::string& backend_id,
               DecodingParams decoding) {
    if (role == Role::judge) throw std::invalid_argument("the judge is not a team");
    validate_trait_set(traits);
    Team team;
    team.role = role;
    if (mode == TeamMode::single) {
        team.members.push_back(AgentConfig{role, traits, backend_id, decoding});
    } else {
        for (const auto& t : traits.traits) {
            team.members.push_back(AgentConfig{role, TraitSet{{t}, false}, backend_id, decoding});
        }
    }
    for (const auto& m : team.members) validate(m);
    return team;
}

std::size_t next_speaker(Team& team) {
    if (team.members.empty()) throw std::invalid_argument("team has no members");
    const std::size_t idx = team.rotation_index % team.members.size();
    ++team.rotation_index;
    return idx;
}

namespace {

std::vector<const Utterance*> filter(const std::vector<Utterance>& history, Phase phase) {
    std::vector<const Utterance*> out;
    for (const auto& u : history) {
        if (u.phase == phase) out.push_back(&u);
    }
    return out;
}

std::string label(const Utterance& u) {
    std::string s(display_name(u.side));
    switch (u.phase) {
        case Phase::opening: return s + " opening";
        case Phase::summary: return s + " summary";
        case Phase::argument:
            return s + " round " + std::to_string(u.round) + " on " + u.issue.value_or("");
        case Phase::deliberation: return s;
    }
    return s;
}

GenerationRequest base_request(const AgentConfig& speaker, Phase phase, int turn) {
    GenerationRequest req;
    req.system_prompt = render_system_prompt(speaker.traits, speaker.role);
    req.decoding = speaker.decoding;
    req.tag.role = speaker.role;
    req.tag.fingerprint = speaker.traits.fingerprint();
    req.tag.turn = turn;
    req.tag.phase = phase;
    return req;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::vector<const Utterance*> Transcript::openings() const { return filter(history, Phase::opening); }
std::vector<const Utterance*> Transcript::arguments() const { return filter(history, Phase::argument); }
std::vector<const Utterance*> Transcript::summaries() const { return filter(history, Phase::summary); }

std::vector<ArgumentCell> Transcript::cells() const {
    std::vector<ArgumentCell> out;
    for (const auto& u : history) {
        if (u.phase != Phase::argument) continue;
        const std::string issue = u.issue.value_or("");
        ArgumentCell* cell = nullptr;
        for (auto& c : out) {
            if (c.round == u.round && c.issue == issue) cell = &c;
        }
        if (!cell) {
            out.push_back(ArgumentCell{u.round, issue, nullptr, nullptr});
            cell = &out.back();
        }
        (u.side == Role::prosecution ? cell->prosecution : cell->defense) = &u;
    }
    return out;
}

const Utterance* opposing_context(const Transcript& transcript, Role side, const std::string& issue) {
    const Role other = opponent(side);
    const Utterance* opening = nullptr;
    const Utterance* latest = nullptr;
    for (const auto& u : transcript.history) {
        if (u.side != other) continue;
        if (u.phase == Phase::opening) opening = &u;
        if (u.phase == Phase::argument && u.issue == issue) latest = &u;
    }
    return latest ? latest : opening;
}

GenerationRequest build_opening_request(const Case& c, const AgentConfig& speaker, int turn) {
    auto req = base_request(speaker, Phase::opening, turn);
    req.messages.push_back({"Case", render_case_context(c)});
    req.messages.push_back(
        {"Instruction", "Deliver the " + std::string(to_string(speaker.role)) +
                            "'s opening statement: state your theory of the case."});
    return req;
}

GenerationRequest build_argument_context(const Case& c, const Transcript& transcript,
                                         const AgentConfig& speaker, Role side, int round,
                                         const std::string& issue, int turn) {
    auto req = base_request(speaker, Phase::argument, turn);
    req.tag.issue = issue;
    req.messages.push_back({"Case", render_case_context(c)});
    req.messages.push_back({"Issue", "Round " + std::to_string(round) + ". Current legal issue: " + issue});
    if (const Utterance* ref = opposing_context(transcript, side, issue)) {
        req.messages.push_back({label(*ref), ref->text});
    }
    req.messages.push_back({"Instruction", "Argue the " + std::string(to_string(side)) +
                                               "'s position on the issue \"" + issue +
                                               "\", responding to the opposing side's last argument."});
    return req;
}

GenerationRequest build_summary_request(const Case& c, const Transcript& transcript,
                                        const AgentConfig& speaker, Role side, int turn) {
    auto req = base_request(speaker, Phase::summary, turn);
    req.messages.push_back({"Case", render_case_context(c)});
    for (const auto& u : transcript.history) {
        if (u.side == side) req.messages.push_back({label(u), u.text});
    }
    req.messages.push_back({"Instruction", "Summarize the " + std::string(to_string(side)) +
                                               " team's cumulative arguments for the judge."});
    return req;
}

DeliberationResult deliberate(const Case& c, const Utterance& prosecution_summary,
                              const Utterance& defense_summary, const AgentConfig& judge,
                              Backend& backend, std::optional<std::uint64_t> seed, int first_turn,
                              const TrialOptions& options) {
    DeliberationResult result;
    const int max_attempts = std::max(1, options.max_judge_attempts);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        auto req = base_request(judge, Phase::deliberation, first_turn + attempt - 1);
        req.seed = seed;
        if (options.judge_sees_case) req.messages.push_back({"Case", render_case_context(c)});
        req.messages.push_back({"Prosecution summary", prosecution_summary.text});
        req.messages.push_back({"Defense summary", defense_summary.text});
        req.messages.push_back({"Instruction", judge_format_instruction(attempt)});
        result.attempts = attempt;
        if (auto v = try_parse_verdict(backend.generate(req))) {
            result.verdict = *v;
            return result;
        }
    }
    result.verdict = Verdict{VerdictLabel::undecided, 0.0};
    result.parse_failure = true;
    return result;
}

TrialRecord run_trial(const Case& c, Team prosecution, Team defense, int n_rounds, const AgentConfig& judge,
                      const BackendRegistry& backends, std::uint64_t seed, const TrialOptions& options) {
    if (n_rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (auto check = validate_case(c); !check.ok()) {
        throw std::invalid_argument("case \"" + c.id + "\" is invalid: " + check.violations.front());
    }
    if (prosecution.role != Role::prosecution || defense.role != Role::defense) {
        throw std::invalid_argument("teams must be (prosecution, defense)");
    }
    if (prosecution.members.empty() || defense.members.empty()) {
        throw std::invalid_argument("teams must have at least one member");
    }
    validate(judge);

    TrialRecord record;
    record.case_name = c.name;
    record.transcript.case_id = c.id;
    record.config.rounds = n_rounds;
    record.config.seed = seed;
    record.config.judge_sees_case = options.judge_sees_case;
    record.config.backend_id = judge.backend_id;
    record.config.decoding = judge.decoding;
    record.config.mode = prosecution.members.size() > 1 ? TeamMode::team : TeamMode::single;
    for (const auto& m : prosecution.members) {
        for (const auto& t : m.traits.traits) record.config.prosecution.traits.push_back(t);
    }
    for (const auto& m : defense.members) {
        for (const auto& t : m.traits.traits) record.config.defense.traits.push_back(t);
    }

    auto& transcript = record.transcript;
    auto speak = [&](Team& team, Phase phase, int round, std::optional<std::string> issue) {
        const std::size_t member = next_speaker(team);
        const AgentConfig& agent = team.members[member];
        const int turn = static_cast<int>(transcript.history.size());
        GenerationRequest req;
        int responds_to = -1;
        switch (phase) {
            case Phase::opening: req = build_opening_request(c, agent, turn); break;
            case Phase::argument: {
                req = build_argument_context(c, transcript, agent, team.role, round, *issue, turn);
                if (const Utterance* ref = opposing_context(transcript, team.role, *issue)) {
                    responds_to = ref->index;
                }
                break;
            }
            case Phase::summary: req = build_summary_request(c, transcript, agent, team.role, turn); break;
            case Phase::deliberation: throw std::logic_error("advocates do not deliberate");
        }
        req.seed = seed;
        std::string text = backends.get(agent.backend_id).generate(req);
        transcript.history.push_back(Utterance{turn, static_cast<int>(member), team.role, phase, round,
                                               std::move(issue), responds_to, std::move(text)});
    };

    auto phase_start = std::chrono::steady_clock::now();
    try {
        speak(prosecution, Phase::opening, 0, std::nullopt);
        speak(defense, Phase::opening, 0, std::nullopt);
        record.timing.opening_ms = elapsed_ms(phase_start);

        phase_start = std::chrono::steady_clock::now();
        for (int r = 1; r <= n_rounds; ++r) {
            for (const auto& issue : c.issues) {
                speak(prosecution, Phase::argument, r, issue.label);
                speak(defense, Phase::argument, r, issue.label);
            }
        }
        record.timing.argument_ms = elapsed_ms(phase_start);

        phase_start = std::chrono::steady_clock::now();
        speak(prosecution, Phase::summary, 0, std::nullopt);
        speak(defense, Phase::summary, 0, std::nullopt);
        record.timing.summary_ms = elapsed_ms(phase_start);

        phase_start = std::chrono::steady_clock::now();
        const auto summaries = transcript.summaries();
        auto result = deliberate(c, *summaries[0], *summaries[1], judge, backends.get(judge.backend_id), seed,
                                 static_cast<int>(transcript.history.size()), options);
        record.timing.deliberation_ms = elapsed_ms(phase_start);
        transcript.verdict = result.verdict;
        transcript.judge_attempts = result.attempts;
        transcript.parse_failure = result.parse_failure;
    } catch (const BackendError& e) {
        record.error = e.what();
    }
    return record;
}

TrialRecord run_trial(const Case& c, const TrialConfig& config, const BackendRegistry& backends) {
    auto prosecution = make_team(Role::prosecution, config.prosecution, config.mode, config.backend_id,
                                 config.decoding);
    auto defense = make_team(Role::defense, config.defense, config.mode, config.backend_id, config.decoding);
    auto judge = make_judge(config.backend_id, config.decoding);
    TrialOptions options;
    options.judge_sees_case = config.judge_sees_case;
    auto record = run_trial(c, std::move(prosecution), std::move(defense), config.rounds, judge, backends,
                            config.seed, options);
    record.config = config;
    return record;
}

}  // namespace courtsim
