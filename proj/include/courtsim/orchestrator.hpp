#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "courtsim/agent_runtime.hpp"
#include "courtsim/case_model.hpp"
#include "courtsim/debate_protocol.hpp"
#include "courtsim/rng.hpp"
#include "courtsim/trait_taxonomy.hpp"

namespace courtsim {

/// +c for not_guilty, -c for guilty, 0 otherwise.
double reward(const Verdict& verdict);

class PolicyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout: one-hot case | issues/10 | evidence/10 | prosecution multi-hot | bias.
struct FeatureSchema {
    static constexpr int kVersion = 1;

    std::vector<std::string> case_ids;
    std::vector<std::string> vocabulary;
    int version = kVersion;

    Eigen::Index dimension() const noexcept {
        return static_cast<Eigen::Index>(case_ids.size() + vocabulary.size()) + 3;
    }
};

FeatureSchema make_feature_schema(const CaseCorpus& corpus, std::vector<std::string> vocabulary);

/// Prosecution traits outside the vocabulary are ignored; unknown cases get a zero one-hot.
Eigen::VectorXd featurize(const FeatureSchema& schema, const Case& c, const TraitSet& prosecution);

struct PolicyParams {
    Eigen::MatrixXd weights;  // vocabulary x feature dimension
    std::vector<std::string> vocabulary;

    static PolicyParams zeros(std::vector<std::string> vocabulary, Eigen::Index feature_dim);
    Eigen::Index vocabulary_size() const noexcept { return weights.rows(); }
};

/// Throws PolicyError on < 3 entries, duplicate names, shape mismatch or non-finite weights.
void validate(const PolicyParams& policy);

/// Log-probability of drawing `sampled` in order, each draw a softmax over the
/// logits of the traits not yet drawn.
template <typename Scalar>
Scalar sequence_log_prob(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& weights,
                         const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& features,
                         const std::vector<int>& sampled) {
    using std::exp;
    using std::log;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits = weights * features;
    std::vector<bool> taken(static_cast<std::size_t>(logits.size()), false);
    Scalar total(0);
    for (int a : sampled) {
        Scalar m = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index j = 0; j < logits.size(); ++j) {
            if (!taken[static_cast<std::size_t>(j)] && logits(j) > m) m = logits(j);
        }
        Scalar z(0);
        for (Eigen::Index j = 0; j < logits.size(); ++j) {
            if (!taken[static_cast<std::size_t>(j)]) z += exp(logits(j) - m);
        }
        total += logits(a) - m - log(z);
        taken[static_cast<std::size_t>(a)] = true;
    }
    return total;
}

/// d log_prob / d logits, with the same draw semantics.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logit_gradient(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& logits,
                                                       const std::vector<int>& sampled) {
    using std::exp;
    const Eigen::Index n = logits.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int a : sampled) {
        Scalar m = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!taken[static_cast<std::size_t>(j)] && logits(j) > m) m = logits(j);
        }
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
        Scalar z(0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!taken[static_cast<std::size_t>(j)]) {
                p(j) = exp(logits(j) - m);
                z += p(j);
            }
        }
        g -= p / z;
        g(a) += Scalar(1);
        taken[static_cast<std::size_t>(a)] = true;
    }
    return g;
}

/// d log_prob / d weights = logit_gradient * features^T.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> log_prob_gradient(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& weights,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& features, const std::vector<int>& sampled) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits = weights * features;
    return logit_gradient<Scalar>(logits, sampled) * features.transpose();
}

struct TraitSample {
    std::vector<int> indices;
    double log_prob = 0;
};

/// `count` draws without replacement from sequential softmaxes. Throws
/// PolicyError on non-finite logits or count > vocabulary.
TraitSample sample_traits(const PolicyParams& policy, const Eigen::VectorXd& features, Rng& rng,
                          std::size_t count = 3);

TraitSet to_trait_set(const PolicyParams& policy, const std::vector<int>& indices);

struct Episode {
    Eigen::VectorXd features;
    TraitSet prosecution;
    std::vector<int> sampled;
    double log_prob = 0;
    double reward = 0;
    Verdict verdict;
};

/// weights += lr * mean_i (reward_i - baseline) * grad log_prob_i.
/// Throws std::invalid_argument on an empty batch or lr <= 0, PolicyError on a
/// non-finite gradient.
void reinforce_update(PolicyParams& policy, const std::vector<Episode>& batch, double learning_rate,
                      double baseline);

double batch_mean_reward(const std::vector<Episode>& batch);

struct EmaBaseline {
    double value = 0.0;
    double decay = 0.95;

    void observe(double r) noexcept { value = decay * value + (1.0 - decay) * r; }
};

/// Runs one trial and returns the judge's verdict.
class Environment {
public:
    virtual ~Environment() = default;
    virtual Verdict play(const Case& c, const TraitSet& prosecution, const TraitSet& defense,
                         std::uint64_t seed) = 0;
};

/// Full debate protocol against a registered backend.
class ProtocolEnvironment final : public Environment {
public:
    ProtocolEnvironment(const BackendRegistry& backends, std::string backend_id, int rounds = 1,
                        TeamMode mode = TeamMode::team, DecodingParams decoding = {});
    Verdict play(const Case& c, const TraitSet& prosecution, const TraitSet& defense, std::uint64_t seed) override;

private:
    const BackendRegistry& backends_;
    std::string backend_id_;
    int rounds_;
    TeamMode mode_;
    DecodingParams decoding_;
};

struct TrainingStats {
    double learning_rate = 0;
    std::vector<double> reward;
    std::vector<double> cum_reward;
    std::vector<double> cum_confidence;
    std::vector<double> cum_win_rate;
    std::vector<double> baseline;
    std::vector<std::vector<std::string>> sampled;  // trait names per episode, draw order
    std::int64_t defense_wins = 0;

    std::size_t episodes() const noexcept { return reward.size(); }
    void record(const Episode& e, const PolicyParams& policy, double baseline_after);
    /// episode,reward,cum_reward,cum_confidence,cum_win_rate,baseline
    std::string csv() const;

    bool operator==(const TrainingStats&) const = default;
};

/// Share of the last `window` episodes whose sampled set equals `target` (unordered).
double selection_rate(const TrainingStats& stats, const TraitSet& target, std::size_t window = 100);
/// Mean reward over the last `window` episodes.
double tail_mean_reward(const TrainingStats& stats, std::size_t window = 100);
/// Least-squares slope of `series` over its last `window` points.
double tail_slope(const std::vector<double>& series, std::size_t window);

struct TrainOptions {
    int episodes = 500;
    std::vector<double> learning_rates = {1e-5, 5e-5, 1e-4};
    std::uint64_t seed = 0;
    std::size_t selection_window = 100;
    double baseline_decay = 0.95;
    std::size_t prosecution_size = 3;
    std::size_t defense_size = 3;
};

struct TrainResult {
    PolicyParams best;
    std::size_t best_index = 0;
    std::vector<TrainingStats> stats;  // one per learning rate, in option order
};

/// Thrown when the environment fails; carries everything recorded so far.
class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(const std::string& what, std::vector<TrainingStats> stats)
        : std::runtime_error(what), stats_(std::move(stats)) {}
    const std::vector<TrainingStats>& stats() const noexcept { return stats_; }

private:
    std::vector<TrainingStats> stats_;
};

/// Episode loop per learning rate from `init`: sample a case and a uniform
/// prosecution team, sample the defense from the policy, play, update.
/// Episode randomness is shared across rates.
TrainResult train(Environment& env, const CaseCorpus& corpus, const FeatureSchema& schema,
                  const PolicyParams& init, const std::vector<std::string>& prosecution_pool,
                  const TrainOptions& options);

struct ArmResult {
    std::string label;  // "policy" or the baseline fingerprint
    std::int64_t trials = 0;
    std::int64_t defense_wins = 0;
    double win_rate = 0;
    double mean_reward = 0;
};

struct EvaluationResult {
    std::vector<ArmResult> arms;  // policy first
    /// Per baseline: share of matched trials where the policy's reward was strictly higher.
    std::vector<double> policy_beats_baseline;
    std::optional<std::string> error;
};

/// n_eval matched trials per arm: trial i uses the same case, prosecution and
/// trial seed in every arm.
EvaluationResult evaluate_policy(const PolicyParams& policy, const FeatureSchema& schema, const CaseCorpus& corpus,
                                 const std::vector<TraitSet>& baselines, Environment& env, int n_eval,
                                 const std::vector<std::string>& prosecution_pool, std::uint64_t seed,
                                 std::size_t defense_size = 3);

void save_checkpoint(const PolicyParams& policy, const FeatureSchema& schema, const std::filesystem::path& path);
/// Throws PolicyError on a schema version or shape mismatch.
std::pair<PolicyParams, FeatureSchema> load_checkpoint(const std::filesystem::path& path);
nlohmann::json checkpoint_json(const PolicyParams& policy, const FeatureSchema& schema);
std::pair<PolicyParams, FeatureSchema> checkpoint_from_json(const nlohmann::json& doc);

}  // namespace courtsim
