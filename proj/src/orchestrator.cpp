#include "courtsim/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "courtsim/csv.hpp"

namespace courtsim {

double reward(const Verdict& verdict) {
    switch (verdict.label) {
        case VerdictLabel::not_guilty: return verdict.confidence;
        case VerdictLabel::guilty: return -verdict.confidence;
        case VerdictLabel::undecided: return 0.0;
    }
    return 0.0;
}

FeatureSchema make_feature_schema(const CaseCorpus& corpus, std::vector<std::string> vocabulary) {
    FeatureSchema s;
    for (const auto& c : corpus.cases) s.case_ids.push_back(c.id);
    s.vocabulary = std::move(vocabulary);
    return s;
}

Eigen::VectorXd featurize(const FeatureSchema& schema, const Case& c, const TraitSet& prosecution) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(schema.dimension());
    const auto n_cases = static_cast<Eigen::Index>(schema.case_ids.size());
    auto it = std::find(schema.case_ids.begin(), schema.case_ids.end(), c.id);
    if (it != schema.case_ids.end()) f(it - schema.case_ids.begin()) = 1.0;
    f(n_cases) = static_cast<double>(c.issues.size()) / 10.0;
    f(n_cases + 1) = static_cast<double>(c.evidence.size()) / 10.0;
    for (std::size_t v = 0; v < schema.vocabulary.size(); ++v) {
        if (prosecution.contains(schema.vocabulary[v])) f(n_cases + 2 + static_cast<Eigen::Index>(v)) = 1.0;
    }
    f(f.size() - 1) = 1.0;
    return f;
}

PolicyParams PolicyParams::zeros(std::vector<std::string> vocabulary, Eigen::Index feature_dim) {
    PolicyParams p;
    p.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocabulary.size()), feature_dim);
    p.vocabulary = std::move(vocabulary);
    return p;
}

void validate(const PolicyParams& policy) {
    if (policy.vocabulary.size() < 3) throw PolicyError("policy vocabulary needs at least 3 traits");
    std::set<std::string> unique(policy.vocabulary.begin(), policy.vocabulary.end());
    if (unique.size() != policy.vocabulary.size()) throw PolicyError("policy vocabulary has duplicate names");
    if (policy.weights.rows() != static_cast<Eigen::Index>(policy.vocabulary.size())) {
        throw PolicyError("weight rows do not match the vocabulary");
    }
    if (!policy.weights.allFinite()) throw PolicyError("policy weights are not finite");
}

TraitSample sample_traits(const PolicyParams& policy, const Eigen::VectorXd& features, Rng& rng,
                          std::size_t count) {
    const Eigen::Index n = policy.weights.rows();
    if (count > static_cast<std::size_t>(n)) throw PolicyError("cannot draw more traits than the vocabulary holds");
    if (features.size() != policy.weights.cols()) throw PolicyError("feature dimension mismatch");
    const Eigen::VectorXd logits = policy.weights * features;
    if (!logits.allFinite()) throw PolicyError("non-finite policy logits");

    TraitSample out;
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    Eigen::VectorXd p(n);
    for (std::size_t draw = 0; draw < count; ++draw) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!taken[static_cast<std::size_t>(j)]) m = std::max(m, logits(j));
        }
        double z = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            p(j) = taken[static_cast<std::size_t>(j)] ? 0.0 : std::exp(logits(j) - m);
            z += p(j);
        }
        const double u = rng.uniform() * z;
        double acc = 0;
        Eigen::Index pick = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (taken[static_cast<std::size_t>(j)]) continue;
            pick = j;  // last untaken index absorbs rounding at the top end
            acc += p(j);
            if (u < acc) break;
        }
        out.log_prob += std::log(p(pick) / z);
        taken[static_cast<std::size_t>(pick)] = true;
        out.indices.push_back(static_cast<int>(pick));
    }
    return out;
}

TraitSet to_trait_set(const PolicyParams& policy, const std::vector<int>& indices) {
    TraitSet s;
    for (int i : indices) s.traits.push_back(policy.vocabulary.at(static_cast<std::size_t>(i)));
    return s;
}

void reinforce_update(PolicyParams& policy, const std::vector<Episode>& batch, double learning_rate,
                      double baseline) {
    if (batch.empty()) throw std::invalid_argument("REINFORCE batch is empty");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    Eigen::MatrixXd step = Eigen::MatrixXd::Zero(policy.weights.rows(), policy.weights.cols());
    for (const auto& e : batch) {
        const double advantage = e.reward - baseline;
        if (advantage == 0.0) continue;
        step += advantage * log_prob_gradient<double>(policy.weights, e.features, e.sampled);
    }
    step /= static_cast<double>(batch.size());
    if (!step.allFinite()) throw PolicyError("non-finite policy gradient");
    policy.weights += learning_rate * step;
}

double batch_mean_reward(const std::vector<Episode>& batch) {
    if (batch.empty()) throw std::invalid_argument("REINFORCE batch is empty");
    double sum = 0;
    for (const auto& e : batch) sum += e.reward;
    return sum / static_cast<double>(batch.size());
}

ProtocolEnvironment::ProtocolEnvironment(const BackendRegistry& backends, std::string backend_id, int rounds,
                                         TeamMode mode, DecodingParams decoding)
    : backends_(backends), backend_id_(std::move(backend_id)), rounds_(rounds), mode_(mode), decoding_(decoding) {}

Verdict ProtocolEnvironment::play(const Case& c, const TraitSet& prosecution, const TraitSet& defense,
                                  std::uint64_t seed) {
    TrialConfig tc{mode_, prosecution, defense, rounds_, backend_id_, seed, true, decoding_};
    auto record = run_trial(c, tc, backends_);
    if (record.error) throw BackendError(BackendError::Kind::transport, *record.error);
    if (!record.transcript.verdict) throw std::runtime_error("trial produced no verdict");
    return *record.transcript.verdict;
}

void TrainingStats::record(const Episode& e, const PolicyParams& policy, double baseline_after) {
    const std::size_t n = reward.size();
    const double prev_reward = n ? cum_reward.back() : 0.0;
    const double prev_conf = n ? cum_confidence.back() : 0.0;
    if (e.verdict.label == VerdictLabel::not_guilty) ++defense_wins;
    reward.push_back(e.reward);
    cum_reward.push_back(prev_reward + e.reward);
    cum_confidence.push_back(prev_conf + e.verdict.confidence);
    cum_win_rate.push_back(static_cast<double>(defense_wins) / static_cast<double>(n + 1));
    baseline.push_back(baseline_after);
    sampled.push_back(to_trait_set(policy, e.sampled).traits);
}

std::string TrainingStats::csv() const {
    std::string out = csv_row({"episode", "reward", "cum_reward", "cum_confidence", "cum_win_rate", "baseline"});
    for (std::size_t i = 0; i < reward.size(); ++i) {
        out += csv_row({std::to_string(i + 1), csv_number(reward[i]), csv_number(cum_reward[i]),
                        csv_number(cum_confidence[i]), csv_number(cum_win_rate[i]), csv_number(baseline[i])});
    }
    return out;
}

double selection_rate(const TrainingStats& stats, const TraitSet& target, std::size_t window) {
    const std::size_t n = stats.sampled.size();
    const std::size_t w = std::min(window, n);
    if (w == 0) return 0.0;
    auto want = target.traits;
    std::sort(want.begin(), want.end());
    std::size_t hits = 0;
    for (std::size_t i = n - w; i < n; ++i) {
        auto got = stats.sampled[i];
        std::sort(got.begin(), got.end());
        if (got == want) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(w);
}

double tail_mean_reward(const TrainingStats& stats, std::size_t window) {
    const std::size_t n = stats.reward.size();
    const std::size_t w = std::min(window, n);
    if (w == 0) return 0.0;
    return std::accumulate(stats.reward.end() - static_cast<std::ptrdiff_t>(w), stats.reward.end(), 0.0) /
           static_cast<double>(w);
}

double tail_slope(const std::vector<double>& series, std::size_t window) {
    const std::size_t n = series.size();
    const std::size_t w = std::min(window, n);
    if (w < 2) return 0.0;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(w), 2);
    Eigen::VectorXd y(static_cast<Eigen::Index>(w));
    for (std::size_t i = 0; i < w; ++i) {
        x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
        x(static_cast<Eigen::Index>(i), 1) = 1.0;
        y(static_cast<Eigen::Index>(i)) = series[n - w + i];
    }
    const Eigen::Vector2d beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    return beta(0);
}

namespace {

struct EpisodeDraw {
    const Case* c = nullptr;
    TraitSet prosecution;
    std::uint64_t trial_seed = 0;
    std::uint64_t policy_seed = 0;
};

EpisodeDraw draw_episode(const CaseCorpus& corpus, const std::vector<std::string>& pool, std::size_t k,
                         std::uint64_t seed, std::uint64_t episode) {
    if (pool.size() < k) throw std::invalid_argument("prosecution pool smaller than the team size");
    Rng rng(derive_seed(seed, episode));
    EpisodeDraw d;
    d.c = &corpus.cases.at(static_cast<std::size_t>(rng.below(corpus.cases.size())));
    std::vector<std::string> names = pool;
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(rng.below(names.size() - i));
        std::swap(names[i], names[j]);
        d.prosecution.traits.push_back(names[i]);
    }
    d.trial_seed = rng();
    d.policy_seed = rng();
    return d;
}

}  // namespace

TrainResult train(Environment& env, const CaseCorpus& corpus, const FeatureSchema& schema,
                  const PolicyParams& init, const std::vector<std::string>& prosecution_pool,
                  const TrainOptions& options) {
    validate(init);
    if (corpus.cases.empty()) throw std::invalid_argument("training needs at least one case");
    if (options.learning_rates.empty()) throw std::invalid_argument("no learning rates to search");
    if (init.weights.cols() != schema.dimension()) throw PolicyError("policy does not match the feature schema");

    TrainResult result;
    std::vector<PolicyParams> finals;
    for (double lr : options.learning_rates) {
        PolicyParams policy = init;
        EmaBaseline baseline{0.0, options.baseline_decay};
        TrainingStats stats;
        stats.learning_rate = lr;
        for (int ep = 0; ep < options.episodes; ++ep) {
            const auto draw = draw_episode(corpus, prosecution_pool, options.prosecution_size, options.seed,
                                           static_cast<std::uint64_t>(ep));
            Episode e;
            e.features = featurize(schema, *draw.c, draw.prosecution);
            e.prosecution = draw.prosecution;
            Rng policy_rng(draw.policy_seed);
            auto sample = sample_traits(policy, e.features, policy_rng, options.defense_size);
            e.sampled = std::move(sample.indices);
            e.log_prob = sample.log_prob;
            try {
                e.verdict = env.play(*draw.c, draw.prosecution, to_trait_set(policy, e.sampled), draw.trial_seed);
            } catch (const std::exception& ex) {
                result.stats.push_back(std::move(stats));
                throw TrainingAborted(fmt::format("episode {} at learning rate {}: {}", ep, lr, ex.what()),
                                      std::move(result.stats));
            }
            e.reward = reward(e.verdict);
            // Advantage uses the baseline from before this episode.
            reinforce_update(policy, {e}, lr, baseline.value);
            baseline.observe(e.reward);
            stats.record(e, policy, baseline.value);
        }
        result.stats.push_back(std::move(stats));
        finals.push_back(std::move(policy));
    }

    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < result.stats.size(); ++i) {
        const double m = tail_mean_reward(result.stats[i], options.selection_window);
        if (m > best) {
            best = m;
            result.best_index = i;
        }
    }
    result.best = finals[result.best_index];
    return result;
}

EvaluationResult evaluate_policy(const PolicyParams& policy, const FeatureSchema& schema, const CaseCorpus& corpus,
                                 const std::vector<TraitSet>& baselines, Environment& env, int n_eval,
                                 const std::vector<std::string>& prosecution_pool, std::uint64_t seed,
                                 std::size_t defense_size) {
    EvaluationResult result;
    if (n_eval <= 0) {
        result.error = "n_eval must be positive";
        return result;
    }
    if (baselines.empty()) {
        result.error = "no baseline trait sets";
        return result;
    }
    validate(policy);

    ArmResult policy_arm{"policy"};
    std::vector<ArmResult> arms;
    for (const auto& b : baselines) arms.push_back(ArmResult{b.fingerprint()});
    std::vector<std::int64_t> beats(baselines.size(), 0);

    for (int i = 0; i < n_eval; ++i) {
        const auto draw = draw_episode(corpus, prosecution_pool, 3, seed, static_cast<std::uint64_t>(i));
        const auto f = featurize(schema, *draw.c, draw.prosecution);
        Rng policy_rng(draw.policy_seed);
        const auto sample = sample_traits(policy, f, policy_rng, defense_size);
        const Verdict pv = env.play(*draw.c, draw.prosecution, to_trait_set(policy, sample.indices), draw.trial_seed);
        const double pr = reward(pv);
        ++policy_arm.trials;
        if (pv.label == VerdictLabel::not_guilty) ++policy_arm.defense_wins;
        policy_arm.mean_reward += pr;
        for (std::size_t b = 0; b < baselines.size(); ++b) {
            const Verdict bv = env.play(*draw.c, draw.prosecution, baselines[b], draw.trial_seed);
            const double br = reward(bv);
            ++arms[b].trials;
            if (bv.label == VerdictLabel::not_guilty) ++arms[b].defense_wins;
            arms[b].mean_reward += br;
            if (pr > br) ++beats[b];
        }
    }
    auto finish = [](ArmResult& a) {
        a.win_rate = static_cast<double>(a.defense_wins) / static_cast<double>(a.trials);
        a.mean_reward /= static_cast<double>(a.trials);
    };
    finish(policy_arm);
    result.arms.push_back(policy_arm);
    for (auto& a : arms) {
        finish(a);
        result.arms.push_back(a);
    }
    for (auto b : beats) result.policy_beats_baseline.push_back(static_cast<double>(b) / n_eval);
    return result;
}

nlohmann::json checkpoint_json(const PolicyParams& policy, const FeatureSchema& schema) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < policy.weights.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(policy.weights.cols()));
        for (Eigen::Index c = 0; c < policy.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = policy.weights(r, c);
        rows.push_back(row);
    }
    return nlohmann::json{{"schema_version", schema.version},
                          {"vocabulary", policy.vocabulary},
                          {"feature_schema", {{"version", schema.version}, {"cases", schema.case_ids}}},
                          {"weights", std::move(rows)}};
}

std::pair<PolicyParams, FeatureSchema> checkpoint_from_json(const nlohmann::json& doc) {
    FeatureSchema schema;
    schema.version = doc.at("schema_version").get<int>();
    if (schema.version != FeatureSchema::kVersion) {
        throw PolicyError(fmt::format("unsupported checkpoint schema version {}", schema.version));
    }
    schema.case_ids = doc.at("feature_schema").at("cases").get<std::vector<std::string>>();
    schema.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();

    PolicyParams policy;
    policy.vocabulary = schema.vocabulary;
    const auto& rows = doc.at("weights");
    policy.weights.resize(static_cast<Eigen::Index>(rows.size()), schema.dimension());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != schema.dimension()) {
            throw PolicyError(fmt::format("weight row {} has {} entries, expected {}", r, row.size(),
                                          schema.dimension()));
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            policy.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        }
    }
    validate(policy);
    return {std::move(policy), std::move(schema)};
}

void save_checkpoint(const PolicyParams& policy, const FeatureSchema& schema, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << checkpoint_json(policy, schema).dump(2) << '\n';
}

std::pair<PolicyParams, FeatureSchema> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PolicyError("checkpoint not found: " + path.string());
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw PolicyError("malformed checkpoint: " + path.string());
    return checkpoint_from_json(doc);
}

}  // namespace courtsim
