#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "courtsim/agent_runtime.hpp"
#include "courtsim/debate_protocol.hpp"
#include "courtsim/tournament.hpp"

namespace courtsim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Settings for the `train` and `evaluate` subcommands.
struct TrainConfig {
    std::string backend_id = "scripted";
    int rounds = 1;
    int episodes = 500;
    std::vector<double> learning_rates = {1e-5, 5e-5, 1e-4};
    int n_eval = 50;
    std::vector<TraitSet> baselines;
    std::optional<std::filesystem::path> taxonomy;  // extra traits for the policy vocabulary
};

/// A parsed experiment file. Relative paths resolve against the file's directory.
struct ExperimentFile {
    std::filesystem::path path;
    std::filesystem::path corpus;
    nlohmann::json backends = nlohmann::json::object();
    std::vector<ExperimentConfig> experiments;
    std::vector<bool> explicit_seed;  // per experiment
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    TrainConfig train;
};

ExperimentFile load_experiment_file(const std::filesystem::path& path);

/// Applies "key=value" overrides. Experiment keys apply to every experiment;
/// "train.<key>" targets the training section. The value is read as JSON when
/// it parses, otherwise as a string. Throws ConfigError on unknown keys.
void apply_overrides(ExperimentFile& file, const std::vector<std::string>& overrides);

/// Builds backends from the "backends" section (types: scripted, remote).
BackendRegistry make_registry(const ExperimentFile& file);

/// "Not Guilty (Confidence: 0.65)".
std::string format_verdict(const Verdict& v);

/// Human-readable transcript ending in one "Verdict:" line.
void render_replay(std::ostream& out, const TrialRecord& record);

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace courtsim
