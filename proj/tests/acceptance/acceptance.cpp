// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "courtsim/cli.hpp"
#include "courtsim/csv.hpp"
#include "courtsim/elo_engine.hpp"
#include "courtsim/orchestrator.hpp"
#include "courtsim/rng.hpp"
#include "courtsim/tournament.hpp"
#include "support/elo_reference.hpp"
#include "support/rigged.hpp"
#include "support/structure.hpp"

using namespace courtsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::vector<std::string>& names() {
    static const auto n = trait_names(builtin_taxonomy());
    return n;
}

TraitSet random_set(Rng& rng, std::size_t k) {
    auto pool = names();
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    return TraitSet{{pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)}};
}

VerdictLabel label_of(std::uint64_t i) {
    return i == 0 ? VerdictLabel::guilty : i == 1 ? VerdictLabel::not_guilty : VerdictLabel::undecided;
}

fs::path source(const char* rel) { return fs::path(COURTSIM_SOURCE_DIR) / rel; }

fs::path scratch(const char* name) {
    auto dir = fs::temp_directory_path() / "courtsim-acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

Outcome elo_oracle() {
    Rng rng(1000);
    EloPools pools;
    std::vector<testing::ReferenceTrial> trials;
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_set(rng, 1 + rng.below(3)), d = random_set(rng, 1 + rng.below(3));
        const auto label = rng.below(3);
        const double c = rng.uniform();
        trials.push_back({p.traits, d.traits, static_cast<int>(label), c});
        apply_trial(pools, {{label_of(label), c}, p, d}, i);
    }
    const auto ref = testing::reference_replay(trials);
    double worst = 0;
    bool same_keys = true;
    auto compare = [&](const EloPool& pool, const std::map<std::string, double>& want) {
        if (pool.ratings.size() != want.size()) same_keys = false;
        for (const auto& [t, r] : want) worst = std::max(worst, std::abs(pool.rating(t) - r));
    };
    compare(pools.overall, ref.overall);
    compare(pools.prosecution, ref.prosecution);
    compare(pools.defense, ref.defense);
    return {same_keys && worst <= 1e-9, fmt::format("1000 trials, max |diff| {:.3g}", worst)};
}

Outcome elo_zero_sum() {
    Rng rng(2);
    EloPools pools;
    double worst = 0;
    int equal_sided = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto n = 1 + rng.below(3);
        const auto p = random_set(rng, n), d = random_set(rng, rng.below(2) ? n : 1 + rng.below(3));
        const auto updates = apply_trial(pools, {{label_of(rng.below(3)), rng.uniform()}, p, d}, i);
        if (p.size() != d.size()) continue;
        ++equal_sided;
        double sum = 0;
        for (const auto& u : updates) {
            if (u.pool == PoolKind::overall) sum += u.delta;
        }
        worst = std::max(worst, std::abs(sum));
    }
    bool k_ok = true;
    double lo = 1e300, hi = -1e300;
    for (double c : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        EloPools fresh;
        const auto updates = apply_trial(fresh, {{VerdictLabel::not_guilty, c}, TraitSet{{"folksy"}}, TraitSet{{"pedantic"}}}, 0);
        for (const auto& u : updates) {
            if (u.k_effective != 32.0 * (0.5 + c)) k_ok = false;
            lo = std::min(lo, u.k_effective);
            hi = std::max(hi, u.k_effective);
        }
    }
    const bool pass = worst <= 1e-12 && k_ok && lo == 16.0 && hi == 48.0;
    return {pass, fmt::format("{} equal-sided trials, max |sum| {:.3g}; K' range [{}, {}]", equal_sided, worst, lo, hi)};
}

// Index sequences in lexicographic order, derived from all n! orderings.
std::vector<std::vector<int>> lexicographic_oracle(int n, int k, bool ordered) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> out;
    do {
        std::vector<int> prefix(perm.begin(), perm.begin() + k);
        if (!ordered && !std::is_sorted(prefix.begin(), prefix.end())) continue;
        if (out.empty() || out.back() != prefix) out.push_back(std::move(prefix));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

Outcome combinatorics() {
    const auto& tax = builtin_taxonomy();
    const auto c93 = enumerate_combinations(tax, 3).size();
    const auto p93 = enumerate_permutations(tax, 3).size();
    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < names().size(); ++i) index[names()[i]] = static_cast<int>(i);
    int mismatches = 0;
    for (int k = 1; k <= 9; ++k) {
        for (bool ordered : {false, true}) {
            const auto got = ordered ? enumerate_permutations(tax, static_cast<std::size_t>(k))
                                     : enumerate_combinations(tax, static_cast<std::size_t>(k));
            const auto want = lexicographic_oracle(9, k, ordered);
            if (got.size() != want.size()) {
                ++mismatches;
                continue;
            }
            for (std::size_t i = 0; i < got.size(); ++i) {
                std::vector<int> idx;
                for (const auto& t : got[i].traits) idx.push_back(index.at(t));
                if (idx != want[i]) {
                    ++mismatches;
                    break;
                }
            }
        }
    }
    return {c93 == 84 && p93 == 504 && mismatches == 0,
            fmt::format("C(9,3)={} P(9,3)={}, {} mismatching (k, order) cases over k=1..9", c93, p93, mismatches)};
}

Outcome transcript_shape() {
    Rng rng(4);
    BackendRegistry reg;
    Script script;
    script.fallback_seed = 4;
    reg.add("scripted", std::make_shared<ScriptedBackend>(script));
    const auto corpus = load_corpus(source("data/corpus.json"));
    int violations = 0;
    std::string first;
    for (int i = 0; i < 200; ++i) {
        Case c = corpus.cases[rng.below(corpus.cases.size())];
        c.issues.clear();
        const auto n_issues = 1 + rng.below(4);
        for (std::uint64_t j = 0; j < n_issues; ++j) c.issues.push_back({"Issue " + std::to_string(j + 1)});
        const int rounds = 1 + static_cast<int>(rng.below(5));
        const auto mode = rng.below(2) ? TeamMode::team : TeamMode::single;
        const auto p = random_set(rng, 1 + rng.below(3)), d = random_set(rng, 1 + rng.below(3));
        const auto rec = run_trial(c, TrialConfig{mode, p, d, rounds, "scripted", rng()}, reg);
        std::vector<std::string> bad;
        if (!rec.ok()) {
            bad.push_back("trial failed: " + *rec.error);
        } else {
            bad = testing::structure_violations(rec.transcript, c, rounds, mode == TeamMode::team ? p.size() : 1,
                                                mode == TeamMode::team ? d.size() : 1);
        }
        violations += static_cast<int>(bad.size());
        if (!bad.empty() && first.empty()) first = bad.front();
    }
    return {violations == 0, fmt::format("200 trials, {} violations{}", violations, first.empty() ? "" : ": " + first)};
}

Outcome replay_determinism() {
    const auto config = source("data/demo/experiment.json").string();
    const auto a = scratch("replay-a"), b = scratch("replay-b"), c = scratch("replay-c"), rebuilt = scratch("replay-r");
    std::string err;
    if (cli({"run", "--config", config, "--output", a.string()}, &err) != 0) return {false, "run failed: " + err};
    if (cli({"run", "--config", config, "--output", b.string()}, &err) != 0) return {false, "rerun failed: " + err};
    if (cli({"run", "--config", config, "--output", c.string(), "--workers", "4", "--override", "rounds=2",
             "--override", "replications=2"},
            &err) != 0) {
        return {false, "variant run failed: " + err};
    }
    const auto c_first = slurp(c / "records.jsonl");
    if (cli({"run", "--config", config, "--output", c.string(), "--workers", "1", "--override", "rounds=2",
             "--override", "replications=2"},
            &err) != 0) {
        return {false, "variant rerun failed: " + err};
    }
    const bool records_same = slurp(a / "records.jsonl") == slurp(b / "records.jsonl");
    const bool variant_same = c_first == slurp(c / "records.jsonl");
    if (cli({"report", (a / "records.jsonl").string(), "--output", rebuilt.string()}, &err) != 0) {
        return {false, "report failed: " + err};
    }
    const auto original = dir_contents(a / "reports");
    const bool reports_same = original == dir_contents(rebuilt);
    return {records_same && variant_same && reports_same,
            fmt::format("records identical: {}, across worker counts: {}, {} report files identical: {}", records_same,
                        variant_same, original.size(), reports_same)};
}

Outcome gradient_check() {
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    Rng rng(6);
    const Eigen::Index n = 9, d = 22;
    double worst = 0;
    for (int point = 0; point < 20; ++point) {
        Eigen::MatrixXd w(n, d);
        Eigen::VectorXd f(d);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) w(r, c) = rng.uniform() * 2 - 1;
        }
        for (Eigen::Index c = 0; c < d; ++c) f(c) = rng.uniform() * 2 - 1;
        PolicyParams p;
        p.weights = w;
        p.vocabulary = names();
        const auto sample = sample_traits(p, f, rng);
        const Eigen::MatrixXd g = log_prob_gradient<double>(w, f, sample.indices);
        const MatL wl = w.cast<long double>();
        const VecL fl = f.cast<long double>();
        const long double h = 1e-7L;
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                MatL plus = wl, minus = wl;
                plus(r, c) += h;
                minus(r, c) -= h;
                const auto fd = static_cast<double>((sequence_log_prob<long double>(plus, fl, sample.indices) -
                                                     sequence_log_prob<long double>(minus, fl, sample.indices)) /
                                                    (2 * h));
                const double scale = std::max({std::abs(fd), std::abs(g(r, c)), 1e-6});
                worst = std::max(worst, std::abs(fd - g(r, c)) / scale);
            }
        }
    }
    return {worst < 1e-4, fmt::format("20 points, max relative error {:.3g}", worst)};
}

Outcome reinforce_convergence() {
    const auto corpus = load_corpus(source("data/corpus.json"));
    const auto schema = make_feature_schema(corpus, names());
    BackendRegistry reg;
    reg.add("rigged", std::make_shared<testing::RiggedBackend>());
    ProtocolEnvironment env(reg, "rigged", 1);
    TrainOptions opts;  // searched rates, 500 episodes
    opts.seed = 42;
    const TraitSet winning{{"methodical", "quantitative", "transparent"}};
    const auto result = train(env, corpus, schema, PolicyParams::zeros(names(), schema.dimension()), names(), opts);
    bool any = false;
    std::string detail = fmt::format("{} episodes;", opts.episodes);
    for (const auto& s : result.stats) {
        const double sel = selection_rate(s, winning, 100);
        const double slope = tail_slope(s.cum_reward, 200);
        any = any || (sel > 0.9 && slope > 0);
        detail += fmt::format(" lr {:g}: selection {:.2f}, cum-reward slope {:.3f};", s.learning_rate, sel, slope);
    }
    detail.pop_back();
    return {any, detail};
}

Outcome reward_function() {
    bool ok = true;
    for (int i = 0; i <= 10; ++i) {
        const double c = i / 10.0;
        ok = ok && reward({VerdictLabel::not_guilty, c}) == c && reward({VerdictLabel::guilty, c}) == -c &&
             reward({VerdictLabel::undecided, c}) == 0.0;
    }
    return {ok, "11 confidence values"};
}

Outcome reversal_metric() {
    const auto G = VerdictLabel::guilty, NG = VerdictLabel::not_guilty, U = VerdictLabel::undecided;
    bool ok = reversal_rate({{1, {G, G, G}}}).rate_by_rounds.at(1) == 0.0;
    ok = ok && reversal_rate({{1, {G, NG, G}}}).rate_by_rounds.at(1) == 0.5;
    ok = ok && reversal_rate({{2, {G, NG}}, {2, {NG, NG}}}).rate_by_rounds.at(2) == 0.5;
    ok = ok && reversal_rate({{1, {NG, U, G, NG}}}).rate_by_rounds.at(1) == 2.0 / 3.0;
    const auto split = reversal_rate({{1, {G, NG}}, {1, {G, G, G}}, {3, {U, U}}});
    ok = ok && split.rate_by_rounds.at(1) == 1.0 / 3.0 && split.rate_by_rounds.at(3) == 0.0;
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        std::vector<ReplicatedSetup> agreeing;
        for (int s = 0; s < 4; ++s) {
            agreeing.push_back({1 + static_cast<int>(rng.below(3)),
                                std::vector<VerdictLabel>(2 + rng.below(5), label_of(rng.below(3)))});
        }
        for (const auto& [_, r] : reversal_rate(agreeing).rate_by_rounds) ok = ok && r == 0.0;
    }
    return {ok, "hand-counted examples and 500 all-agreeing lists"};
}

Outcome verdict_parsing() {
    const Verdict want{VerdictLabel::not_guilty, 0.65};
    const std::vector<std::string> forms = {
        R"({"verdict": "not guilty", "confidence": 0.65})",
        R"(Having weighed the arguments, my ruling is {"verdict": "not guilty", "confidence": 0.65}.)",
        "Verdict: Not Guilty (Confidence: 0.65)"};
    int recovered = 0;
    for (const auto& f : forms) {
        if (auto v = try_parse_verdict(f); v && *v == want) ++recovered;
    }
    Rng rng(10);
    const std::string alphabet = "{}\":,.-+0123456789eE %guiltynotGUILTYNOTundecidedverdictconfidence_\n\t";
    const std::vector<std::string> pieces = {"guilty", "not guilty", "Verdict:", "confidence", "Confidence:",
                                             "1.5",    "-0.2",       "0.65",     "{",          "}",
                                             "\"verdict\":", "\"confidence\":", "nan", "inf", "1e308", "%"};
    int malformed = 0, parsed = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        const auto len = rng.below(80);
        for (std::uint64_t j = 0; j < len; ++j) {
            if (rng.below(3) == 0) {
                s += pieces[rng.below(pieces.size())];
            } else {
                s.push_back(alphabet[rng.below(alphabet.size())]);
            }
        }
        try {
            const auto v = parse_verdict(s);
            ++parsed;
            const bool label_ok = v.label == VerdictLabel::guilty || v.label == VerdictLabel::not_guilty ||
                                  v.label == VerdictLabel::undecided;
            if (!label_ok || !std::isfinite(v.confidence) || v.confidence < 0 || v.confidence > 1) ++malformed;
        } catch (const VerdictParseError&) {
        }
    }
    return {recovered == 3 && malformed == 0,
            fmt::format("{}/3 forms recovered; fuzz: {} parsed, {} rejected, {} malformed", recovered, parsed,
                        10000 - parsed, malformed)};
}

Outcome end_to_end_demo() {
    const auto dir = scratch("demo");
    std::string err;
    if (cli({"run", "--config", source("data/demo/experiment.json").string(), "--output", dir.string()}, &err) != 0) {
        return {false, "run failed: " + err};
    }
    const auto records = slurp(dir / "records.jsonl");
    const auto n_records = std::count(records.begin(), records.end(), '\n');
    const auto reports = dir / "reports";
    const std::string label = "single_1traits_1rounds_scripted";
    std::vector<std::string> missing;
    for (const auto& name : {"summary.csv", "top_prosecution.csv", "top_defense.csv", "top_overall.csv",
                             "best_configs.csv", "aggregate.csv", "trait_frequency.csv"}) {
        if (!fs::exists(reports / name)) missing.push_back(name);
    }
    for (const auto& name : {"elo_" + label + ".csv", "elo_updates_" + label + ".jsonl"}) {
        if (!fs::exists(reports / name)) missing.push_back(name);
    }
    if (!missing.empty()) return {false, "missing " + missing.front()};

    std::vector<std::string> problems;
    const auto summary = parse_csv(slurp(reports / "summary.csv"));
    std::int64_t trials = 0, failed = 0, dw = 0, pw = 0, und = 0;
    if (summary.size() == 2) {
        trials = std::stoll(summary[1][1]);
        failed = std::stoll(summary[1][2]);
        dw = std::stoll(summary[1][4]);
        pw = std::stoll(summary[1][5]);
        und = std::stoll(summary[1][6]);
    } else {
        problems.push_back("summary.csv should have one condition");
    }
    if (trials != 18 || n_records != 18) problems.push_back("expected 18 trials");
    if (failed + dw + pw + und != trials) problems.push_back("summary outcome counts do not add up");

    std::map<std::string, std::int64_t> per_dimension;
    for (const auto& row : parse_csv(slurp(reports / "aggregate.csv"))) {
        if (row[0] != "dimension") per_dimension[row[0]] += std::stoll(row[5]);
    }
    if (per_dimension.size() != 4) problems.push_back("aggregate.csv should cover 4 dimensions");
    for (const auto& [dim, n] : per_dimension) {
        if (n != trials) problems.push_back("aggregate " + dim + " trials != " + std::to_string(trials));
    }

    std::map<std::string, std::int64_t> updates_by_pool;
    for (const auto& row : parse_csv(slurp(reports / ("elo_" + label + ".csv")))) {
        if (row[0] != "pool_kind") updates_by_pool[row[0]] += std::stoll(row[3]);
    }
    const auto decided = trials - failed;
    if (updates_by_pool["overall"] != 2 * decided || updates_by_pool["prosecution"] != decided ||
        updates_by_pool["defense"] != decided) {
        problems.push_back("Elo update counts do not match the trial count");
    }
    const auto log = slurp(reports / ("elo_updates_" + label + ".jsonl"));
    if (std::count(log.begin(), log.end(), '\n') != 4 * decided) problems.push_back("update log length");

    std::map<std::string, double> freq_sum;
    for (const auto& row : parse_csv(slurp(reports / "trait_frequency.csv"))) {
        if (row[0] != "side") freq_sum[row[0]] += std::stod(row[2]);
    }
    for (const auto& [side, sum] : freq_sum) {
        if (std::abs(sum - 1.0) > 1e-6) problems.push_back("singleton " + side + " frequencies do not sum to 1");
    }
    return {problems.empty(), problems.empty() ? fmt::format("{} trials, reports consistent", trials)
                                               : problems.front()};
}

struct Criterion {
    int id;
    std::string name;
    double limit_seconds;  // 0: no limit
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "Elo oracle equivalence", 5, elo_oracle},
        {2, "Elo zero-sum and confidence-scaled K", 0, elo_zero_sum},
        {3, "Trait-set combinatorics", 1, combinatorics},
        {4, "Transcript shape", 30, transcript_shape},
        {5, "Replay determinism", 0, replay_determinism},
        {6, "Policy-gradient correctness", 10, gradient_check},
        {7, "REINFORCE convergence at the searched rates", 120, reinforce_convergence},
        {8, "Reward function", 0, reward_function},
        {9, "Reversal-rate metric", 0, reversal_metric},
        {10, "Verdict parsing robustness", 10, verdict_parsing},
        {11, "End-to-end demo", 10, end_to_end_demo},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt::format("{:.2f} s", secs);
        if (c.limit_seconds > 0) {
            timing += fmt::format(" / limit {:g} s", c.limit_seconds);
            if (secs >= c.limit_seconds) {
                o.pass = false;
                o.detail += "; over time limit";
            }
        }
        if (!o.pass) ++failures;
        std::cout << fmt::format("[{}] {}. {}: {} ({})\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail, timing)
                  << std::flush;
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
                             criteria.size());
    return failures == 0 ? 0 : 1;
}
