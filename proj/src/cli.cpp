#include "courtsim/cli.hpp"

#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "courtsim/case_model.hpp"
#include "courtsim/csv.hpp"
#include "courtsim/orchestrator.hpp"
#include "courtsim/records.hpp"
#include "courtsim/remote_backend.hpp"
#include "courtsim/rng.hpp"

namespace courtsim {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kExperimentKeys = {
    "mode",   "trait_count", "rounds",  "backend_id",      "enumeration",         "cases",
    "traits", "replications", "seed",   "pairings_max",    "workers",             "judge_sees_case",
    "include_parse_failures",  "base_k", "initial_rating", "temperature",         "top_p",
    "max_tokens"};

const std::set<std::string> kTrainKeys = {"backend_id", "rounds",    "episodes", "learning_rates",
                                          "n_eval",     "baselines", "taxonomy"};

TraitSet trait_set_from(const nlohmann::json& j) {
    return TraitSet{j.get<std::vector<std::string>>(), false};
}

void apply_train_key(TrainConfig& t, const std::string& key, const nlohmann::json& v, const fs::path& base) {
    if (key == "backend_id") {
        t.backend_id = v.get<std::string>();
    } else if (key == "rounds") {
        t.rounds = v.get<int>();
    } else if (key == "episodes") {
        t.episodes = v.get<int>();
    } else if (key == "learning_rates") {
        t.learning_rates = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
    } else if (key == "n_eval") {
        t.n_eval = v.get<int>();
    } else if (key == "baselines") {
        t.baselines.clear();
        for (const auto& b : v) t.baselines.push_back(trait_set_from(b));
    } else if (key == "taxonomy") {
        t.taxonomy = base / v.get<std::string>();
    } else {
        throw ConfigError("unknown train key \"" + key + "\"");
    }
}

void apply_experiment_key(ExperimentConfig& c, const std::string& key, const nlohmann::json& v) {
    if (!kExperimentKeys.count(key)) throw ConfigError("unknown experiment key \"" + key + "\"");
    nlohmann::json j;
    to_json(j, c);
    j[key] = v;
    from_json(j, c);
}

nlohmann::json parse_override_value(const std::string& text) {
    auto v = nlohmann::json::parse(text, nullptr, false);
    if (v.is_discarded()) return nlohmann::json(text);
    return v;
}

std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
}

std::string title_case(std::string_view s) {
    std::string out(s);
    bool start = true;
    for (auto& ch : out) {
        if (ch == '_') {
            ch = ' ';
            start = true;
        } else if (start) {
            ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            start = false;
        }
    }
    return out;
}

std::string timing_csv(const std::vector<TrialRecord>& records) {
    std::string out =
        csv_row({"condition", "trial_index", "opening_ms", "argument_ms", "summary_ms", "deliberation_ms"});
    for (const auto& r : records) {
        out += csv_row({r.condition, std::to_string(r.trial_index), csv_number(r.timing.opening_ms),
                        csv_number(r.timing.argument_ms), csv_number(r.timing.summary_ms),
                        csv_number(r.timing.deliberation_ms)});
    }
    return out;
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string output;
    std::vector<std::string> overrides;
};

std::uint64_t resolve_seed(const Common& c, const ExperimentFile& file, std::ostream& out) {
    if (c.seed) return *c.seed;
    if (file.seed) return *file.seed;
    const auto s = fresh_seed();
    out << "seed: " << s << "\n";
    return s;
}

ExperimentFile load_with_overrides(const Common& c) {
    if (c.config.empty()) throw ConfigError("--config is required");
    auto file = load_experiment_file(c.config);
    apply_overrides(file, c.overrides);
    return file;
}

int cmd_run(const Common& c, std::ostream& out, std::ostream& err) {
    auto file = load_with_overrides(c);
    const auto root_seed = resolve_seed(c, file, out);
    const auto corpus = load_corpus(file.corpus);
    const auto registry = make_registry(file);
    const fs::path dir = c.output.empty() ? fs::path("courtsim-out") : fs::path(c.output);
    fs::create_directories(dir);

    std::set<std::string> labels;
    std::vector<TrialRecord> all;
    std::int64_t failed = 0;
    for (std::size_t i = 0; i < file.experiments.size(); ++i) {
        auto cfg = file.experiments[i];
        if (!file.explicit_seed[i] || c.seed) cfg.seed = derive_seed(root_seed, i);
        if (c.workers) {
            cfg.workers = *c.workers;
        } else if (file.workers) {
            cfg.workers = *file.workers;
        }
        const auto label = condition_label(cfg);
        if (!labels.insert(label).second) throw ConfigError("duplicate condition " + label);

        auto result = run_experiment(cfg, corpus, builtin_taxonomy(), registry);
        std::int64_t wins = 0, ok = 0;
        for (const auto& r : result.records) {
            if (!r.ok()) {
                ++failed;
                continue;
            }
            ++ok;
            if (r.transcript.verdict && r.transcript.verdict->label == VerdictLabel::not_guilty) ++wins;
        }
        auto top = [&](PoolKind k) {
            auto ranked = rankings(result.pools.get(k));
            return ranked.empty() ? std::string("-") : ranked.front().first;
        };
        out << fmt::format("{}: trials={} ok={} defense_win_rate={:.3f} top overall={} prosecution={} defense={}\n",
                           label, result.records.size(), ok,
                           ok ? static_cast<double>(wins) / static_cast<double>(ok) : 0.0,
                           top(PoolKind::overall), top(PoolKind::prosecution_role), top(PoolKind::defense_role));
        for (auto& r : result.records) all.push_back(std::move(r));
    }

    write_records(dir / "records.jsonl", all);
    write_file(dir / "timing.csv", timing_csv(all));
    write_reports(render_reports(all), dir / "reports");
    out << "records: " << (dir / "records.jsonl").string() << "\n";
    if (failed > 0) {
        err << "error: " << failed << " of " << all.size() << " trials failed; see the error field in the records\n";
        return 3;
    }
    return 0;
}

int cmd_report(const std::string& records_path, const std::string& output, const std::string& pool,
               std::ostream& out) {
    const auto kind = pool_kind_from_string(pool);
    const auto records = read_records(fs::path(records_path));
    const fs::path dir = output.empty() ? fs::path(records_path).parent_path() / "reports" : fs::path(output);
    write_reports(render_reports(records), dir);
    for (const auto& s : summarize_conditions(records)) {
        out << s.label << " (" << to_string(kind) << "):";
        for (const auto& [trait, rating] : rankings(s.pools.get(kind))) {
            out << fmt::format(" {}={:.1f}", trait, rating);
        }
        out << "\n";
    }
    out << "reports: " << dir.string() << " (" << records.size() << " records)\n";
    return 0;
}

int cmd_replay(const std::string& records_path, std::int64_t trial, std::ostream& out, std::ostream& err) {
    const auto records = read_records(fs::path(records_path));
    if (trial < 0 || trial >= static_cast<std::int64_t>(records.size())) {
        err << "error: trial " << trial << " out of range (" << records.size() << " records)\n";
        return 2;
    }
    render_replay(out, records[static_cast<std::size_t>(trial)]);
    return 0;
}

int cmd_corpus_validate(const std::string& path, std::ostream& out) {
    const auto corpus = load_corpus(path);
    out << "ok: " << corpus.cases.size() << " cases in " << path << "\n";
    return 0;
}

std::vector<std::string> policy_vocabulary(const TrainConfig& t) {
    auto names = trait_names(builtin_taxonomy());
    if (t.taxonomy) {
        for (const auto& trait : load_taxonomy(*t.taxonomy)) {
            if (std::find(names.begin(), names.end(), trait.name) == names.end()) names.push_back(trait.name);
        }
    }
    return names;
}

std::string evaluation_csv(const EvaluationResult& e) {
    std::string out = csv_row({"arm", "trials", "defense_wins", "win_rate", "mean_reward", "policy_beats_arm"});
    for (std::size_t i = 0; i < e.arms.size(); ++i) {
        const auto& a = e.arms[i];
        out += csv_row({a.label, std::to_string(a.trials), std::to_string(a.defense_wins), csv_number(a.win_rate),
                        csv_number(a.mean_reward), i == 0 ? "" : csv_number(e.policy_beats_baseline[i - 1])});
    }
    return out;
}

int cmd_train(const Common& c, std::ostream& out, std::ostream& err) {
    auto file = load_with_overrides(c);
    const auto seed = resolve_seed(c, file, out);
    const auto corpus = load_corpus(file.corpus);
    const auto registry = make_registry(file);
    const auto& t = file.train;
    const fs::path dir = c.output.empty() ? fs::path("courtsim-train") : fs::path(c.output);
    fs::create_directories(dir);

    const auto vocab = policy_vocabulary(t);
    const auto schema = make_feature_schema(corpus, vocab);
    const auto init = PolicyParams::zeros(vocab, schema.dimension());
    ProtocolEnvironment env(registry, t.backend_id, t.rounds);
    TrainOptions opts;
    opts.episodes = t.episodes;
    opts.learning_rates = t.learning_rates;
    opts.seed = seed;

    auto write_stats = [&](const std::vector<TrainingStats>& stats) {
        for (const auto& s : stats) {
            write_file(dir / fmt::format("training_stats_lr{:g}.csv", s.learning_rate), s.csv());
        }
    };

    TrainResult result;
    try {
        result = train(env, corpus, schema, init, trait_names(builtin_taxonomy()), opts);
    } catch (const TrainingAborted& e) {
        write_stats(e.stats());
        err << "error: training aborted: " << e.what() << "\n";
        return 3;
    }
    write_stats(result.stats);
    save_checkpoint(result.best, schema, dir / "checkpoint.json");

    std::string summary = csv_row({"learning_rate", "episodes", "tail_mean_reward", "cum_win_rate", "selected"});
    for (std::size_t i = 0; i < result.stats.size(); ++i) {
        const auto& s = result.stats[i];
        summary += csv_row({fmt::format("{:g}", s.learning_rate), std::to_string(s.episodes()),
                            csv_number(tail_mean_reward(s)), csv_number(s.cum_win_rate.empty() ? 0.0 : s.cum_win_rate.back()),
                            i == result.best_index ? "1" : "0"});
    }
    write_file(dir / "training_summary.csv", summary);
    out << fmt::format("selected learning rate {:g}; checkpoint: {}\n", result.stats[result.best_index].learning_rate,
                       (dir / "checkpoint.json").string());

    if (!t.baselines.empty() && t.n_eval > 0) {
        auto eval = evaluate_policy(result.best, schema, corpus, t.baselines, env, t.n_eval,
                                    trait_names(builtin_taxonomy()), derive_seed(seed, 0x6576616cULL));
        write_file(dir / "evaluation.csv", evaluation_csv(eval));
    }
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, std::ostream& out, std::ostream& err) {
    auto file = load_with_overrides(c);
    const auto seed = resolve_seed(c, file, out);
    const auto corpus = load_corpus(file.corpus);
    const auto registry = make_registry(file);
    const auto& t = file.train;
    auto [policy, schema] = load_checkpoint(checkpoint);
    ProtocolEnvironment env(registry, t.backend_id, t.rounds);
    auto eval = evaluate_policy(policy, schema, corpus, t.baselines, env, t.n_eval, trait_names(builtin_taxonomy()),
                                derive_seed(seed, 0x6576616cULL));
    if (eval.error) {
        err << "error: " << *eval.error << "\n";
        return 2;
    }
    const auto csv = evaluation_csv(eval);
    if (!c.output.empty()) {
        fs::create_directories(c.output);
        write_file(fs::path(c.output) / "evaluation.csv", csv);
    }
    out << csv;
    return 0;
}

}  // namespace

ExperimentFile load_experiment_file(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config not found: " + path.string());
    auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError("config is not a JSON object: " + path.string());
    const fs::path base = path.parent_path();

    ExperimentFile f;
    f.path = path;
    if (!doc.contains("corpus")) throw ConfigError("config has no \"corpus\" entry");
    f.corpus = base / doc.at("corpus").get<std::string>();
    if (doc.contains("backends")) f.backends = doc.at("backends");
    if (doc.contains("seed")) f.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("workers")) f.workers = doc.at("workers").get<int>();

    // Either a list of experiments or one experiment's keys at top level.
    std::vector<nlohmann::json> entries;
    if (doc.contains("experiments")) {
        for (const auto& e : doc.at("experiments")) entries.push_back(e);
    } else {
        nlohmann::json e = nlohmann::json::object();
        for (const auto& key : kExperimentKeys) {
            if (key != "seed" && key != "workers" && doc.contains(key)) e[key] = doc.at(key);
        }
        entries.push_back(e);
    }
    for (const auto& e : entries) {
        if (!e.is_object()) throw ConfigError("experiment entries must be objects");
        for (const auto& [key, _] : e.items()) {
            if (!kExperimentKeys.count(key)) throw ConfigError("unknown experiment key \"" + key + "\"");
        }
        ExperimentConfig cfg;
        try {
            from_json(e, cfg);
            validate(cfg);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError(std::string("invalid experiment: ") + ex.what());
        }
        f.experiments.push_back(cfg);
        f.explicit_seed.push_back(e.contains("seed"));
    }

    if (doc.contains("train")) {
        for (const auto& [key, v] : doc.at("train").items()) apply_train_key(f.train, key, v, base);
    }
    return f;
}

void apply_overrides(ExperimentFile& file, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: \"" + o + "\"");
        const auto key = o.substr(0, eq);
        const auto value = parse_override_value(o.substr(eq + 1));
        try {
            if (key.rfind("train.", 0) == 0) {
                apply_train_key(file.train, key.substr(6), value, file.path.parent_path());
            } else {
                for (std::size_t i = 0; i < file.experiments.size(); ++i) {
                    apply_experiment_key(file.experiments[i], key, value);
                    validate(file.experiments[i]);
                    if (key == "seed") file.explicit_seed[i] = true;
                }
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError("override \"" + o + "\": " + ex.what());
        }
    }
}

BackendRegistry make_registry(const ExperimentFile& file) {
    BackendRegistry registry;
    const fs::path base = file.path.parent_path();
    for (const auto& [id, spec] : file.backends.items()) {
        const auto type = spec.value("type", std::string{});
        if (type == "scripted") {
            Script script;
            if (spec.contains("script")) {
                script = load_script(base / spec.at("script").get<std::string>());
            } else {
                script.fallback_seed = spec.value("fallback_seed", std::uint64_t{0});
            }
            registry.add(id, std::make_shared<ScriptedBackend>(std::move(script)));
        } else if (type == "remote") {
            registry.add(id, std::make_shared<RemoteBackend>(endpoint_from_json(spec)));
        } else {
            throw ConfigError("backend \"" + id + "\" has unknown type \"" + type + "\"");
        }
    }
    return registry;
}

std::string format_verdict(const Verdict& v) {
    return fmt::format("{} (Confidence: {:.2f})", title_case(to_string(v.label)), v.confidence);
}

void render_replay(std::ostream& out, const TrialRecord& record) {
    const auto& t = record.transcript;
    const auto& cfg = record.config;
    auto traits = [](const TraitSet& s) {
        std::string joined;
        for (const auto& name : s.traits) joined += (joined.empty() ? "" : ", ") + name;
        return joined;
    };
    out << record.case_name << " [" << record.condition << ", trial " << record.trial_index << "]\n";
    out << "Prosecution traits (" << traits(cfg.prosecution) << ") vs. defense traits (" << traits(cfg.defense)
        << ")\n\n";
    auto block = [&](const std::string& heading, const Utterance& u) {
        out << heading << ":\n  \"" << u.text << "\"\n\n";
    };
    for (const auto* u : t.openings()) block(std::string(display_name(u->side)) + " Opening", *u);
    int round = 0;
    for (const auto& cell : t.cells()) {
        if (cell.round != round) {
            round = cell.round;
            out << "Round " << round << "\n\n";
        }
        if (cell.prosecution) block("Prosecution on " + cell.issue, *cell.prosecution);
        if (cell.defense) block("Defense on " + cell.issue, *cell.defense);
    }
    for (const auto* u : t.summaries()) block(std::string(display_name(u->side)) + " Summary", *u);
    if (t.verdict) {
        out << "Verdict: " << format_verdict(*t.verdict);
        if (t.parse_failure) out << " [judge output unparseable]";
        out << "\n";
    } else {
        out << "Verdict: none (trial failed: " << record.error.value_or("no verdict") << ")\n";
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trait-conditioned courtroom debate simulator", "courtsim"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub, bool workers) {
        sub->add_option("--config", common.config, "Experiment config (JSON)")->required();
        sub->add_option("--seed", common.seed, "Root seed; printed when generated");
        if (workers) sub->add_option("--workers", common.workers, "Concurrent trials")->check(CLI::PositiveNumber);
        sub->add_option("--output", common.output, "Output directory");
        sub->add_option("--override", common.overrides, "key=value, repeatable");
    };

    auto* run = app.add_subcommand("run", "Run the configured experiments");
    add_common(run, true);
    auto* train_cmd = app.add_subcommand("train", "Train the defense trait orchestrator");
    add_common(train_cmd, false);
    auto* eval_cmd = app.add_subcommand("evaluate", "Compare a policy checkpoint against static trait sets");
    add_common(eval_cmd, false);
    std::string checkpoint;
    eval_cmd->add_option("--checkpoint", checkpoint, "Policy checkpoint (JSON)")->required();

    std::string records_path, report_output, pool = "overall";
    auto* report = app.add_subcommand("report", "Rebuild report CSVs from trial records");
    report->add_option("records", records_path, "Trial records (JSON lines)")->required();
    report->add_option("--output", report_output, "Report directory (default: reports/ next to the records)");
    report->add_option("--pool", pool, "Ranking printed to stdout")
        ->check(CLI::IsMember({"overall", "prosecution", "defense"}));

    std::int64_t trial = 0;
    std::string replay_records;
    auto* replay = app.add_subcommand("replay", "Print one trial transcript");
    replay->add_option("records", replay_records, "Trial records (JSON lines)")->required();
    replay->add_option("--trial", trial, "Record position in the file, from 0");

    std::string corpus_path;
    auto* validate_cmd = app.add_subcommand("corpus-validate", "Check a case corpus");
    validate_cmd->add_option("corpus", corpus_path, "Corpus JSON")->required();

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run) return cmd_run(common, out, err);
        if (*train_cmd) return cmd_train(common, out, err);
        if (*eval_cmd) return cmd_evaluate(common, checkpoint, out, err);
        if (*report) return cmd_report(records_path, report_output, pool, out);
        if (*replay) return cmd_replay(replay_records, trial, out, err);
        if (*validate_cmd) return cmd_corpus_validate(corpus_path, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace courtsim
