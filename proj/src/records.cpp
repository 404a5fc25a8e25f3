#include "courtsim/records.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace courtsim {

void to_json(nlohmann::json& j, const Verdict& v) {
    j = nlohmann::json{{"label", std::string(to_string(v.label))}, {"confidence", v.confidence}};
}

void from_json(const nlohmann::json& j, Verdict& v) {
    v.label = verdict_label_from_string(j.at("label").get<std::string>());
    v.confidence = j.at("confidence").get<double>();
    if (!(v.confidence >= 0.0 && v.confidence <= 1.0)) {
        throw std::invalid_argument("verdict confidence outside [0, 1]");
    }
}

namespace {

nlohmann::json utterance_json(const Utterance& u) {
    return nlohmann::json{{"index", u.index},
                          {"speaker", u.speaker},
                          {"side", std::string(to_string(u.side))},
                          {"phase", std::string(to_string(u.phase))},
                          {"round", u.round},
                          {"issue", u.issue ? nlohmann::json(*u.issue) : nlohmann::json(nullptr)},
                          {"responds_to", u.responds_to},
                          {"text", u.text}};
}

Utterance utterance_from(const nlohmann::json& j) {
    Utterance u;
    u.index = j.at("index").get<int>();
    u.speaker = j.at("speaker").get<int>();
    u.side = role_from_string(j.at("side").get<std::string>());
    u.phase = phase_from_string(j.at("phase").get<std::string>());
    u.round = j.at("round").get<int>();
    if (!j.at("issue").is_null()) u.issue = j.at("issue").get<std::string>();
    u.responds_to = j.at("responds_to").get<int>();
    u.text = j.at("text").get<std::string>();
    return u;
}

nlohmann::json optional_utterance(const Utterance* u) {
    return u ? utterance_json(*u) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json record_to_json(const TrialRecord& record) {
    const auto& t = record.transcript;
    auto openings = nlohmann::json::array();
    for (const auto* u : t.openings()) openings.push_back(utterance_json(*u));
    auto rounds = nlohmann::json::array();
    for (const auto& cell : t.cells()) {
        rounds.push_back({{"round", cell.round},
                          {"issue", cell.issue},
                          {"prosecution", optional_utterance(cell.prosecution)},
                          {"defense", optional_utterance(cell.defense)}});
    }
    auto summaries = nlohmann::json::array();
    for (const auto* u : t.summaries()) summaries.push_back(utterance_json(*u));

    const auto& cfg = record.config;
    return nlohmann::json{
        {"condition", record.condition},
        {"trial_index", record.trial_index},
        {"replication", record.replication},
        {"case_id", t.case_id},
        {"case_name", record.case_name},
        {"config",
         {{"mode", std::string(to_string(cfg.mode))},
          {"prosecution_traits", cfg.prosecution.traits},
          {"defense_traits", cfg.defense.traits},
          {"ordered", cfg.prosecution.ordered},
          {"rounds", cfg.rounds},
          {"backend_id", cfg.backend_id},
          {"seed", cfg.seed},
          {"judge_sees_case", cfg.judge_sees_case},
          {"decoding",
           {{"temperature", cfg.decoding.temperature},
            {"top_p", cfg.decoding.top_p},
            {"max_tokens", cfg.decoding.max_tokens}}}}},
        {"status", record.ok() ? "ok" : "failed"},
        {"error", record.error ? nlohmann::json(*record.error) : nlohmann::json(nullptr)},
        {"transcript",
         {{"openings", std::move(openings)},
          {"rounds", std::move(rounds)},
          {"summaries", std::move(summaries)},
          {"verdict", t.verdict ? nlohmann::json(*t.verdict) : nlohmann::json(nullptr)},
          {"judge_attempts", t.judge_attempts},
          {"parse_failure", t.parse_failure}}}};
}

TrialRecord record_from_json(const nlohmann::json& j) {
    TrialRecord r;
    r.condition = j.at("condition").get<std::string>();
    r.trial_index = j.at("trial_index").get<std::int64_t>();
    r.replication = j.at("replication").get<int>();
    r.case_name = j.at("case_name").get<std::string>();

    const auto& cfg = j.at("config");
    r.config.mode = team_mode_from_string(cfg.at("mode").get<std::string>());
    const bool ordered = cfg.at("ordered").get<bool>();
    r.config.prosecution = TraitSet{cfg.at("prosecution_traits").get<std::vector<std::string>>(), ordered};
    r.config.defense = TraitSet{cfg.at("defense_traits").get<std::vector<std::string>>(), ordered};
    r.config.rounds = cfg.at("rounds").get<int>();
    r.config.backend_id = cfg.at("backend_id").get<std::string>();
    r.config.seed = cfg.at("seed").get<std::uint64_t>();
    r.config.judge_sees_case = cfg.at("judge_sees_case").get<bool>();
    const auto& dec = cfg.at("decoding");
    r.config.decoding.temperature = dec.at("temperature").get<double>();
    r.config.decoding.top_p = dec.at("top_p").get<double>();
    r.config.decoding.max_tokens = dec.at("max_tokens").get<int>();

    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw std::invalid_argument("unknown status \"" + status + "\"");
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    if (status == "failed" && !r.error) r.error = "failed";

    auto& t = r.transcript;
    t.case_id = j.at("case_id").get<std::string>();
    const auto& tj = j.at("transcript");
    for (const auto& u : tj.at("openings")) t.history.push_back(utterance_from(u));
    for (const auto& cell : tj.at("rounds")) {
        for (const char* side : {"prosecution", "defense"}) {
            if (!cell.at(side).is_null()) t.history.push_back(utterance_from(cell.at(side)));
        }
    }
    for (const auto& u : tj.at("summaries")) t.history.push_back(utterance_from(u));
    std::sort(t.history.begin(), t.history.end(),
              [](const Utterance& a, const Utterance& b) { return a.index < b.index; });
    if (!tj.at("verdict").is_null()) t.verdict = tj.at("verdict").get<Verdict>();
    t.judge_attempts = tj.at("judge_attempts").get<int>();
    t.parse_failure = tj.at("parse_failure").get<bool>();
    return r;
}

std::string record_line(const TrialRecord& record) { return record_to_json(record).dump(); }

void write_records(std::ostream& out, const std::vector<TrialRecord>& records) {
    for (const auto& r : records) out << record_line(r) << '\n';
}

void write_records(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write records: " + path.string());
    write_records(out, records);
}

std::vector<TrialRecord> read_records(std::istream& in) {
    std::vector<TrialRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            throw RecordError("line " + std::to_string(line_no) + ": malformed JSON", line_no);
        }
        try {
            out.push_back(record_from_json(doc));
        } catch (const std::exception& e) {
            throw RecordError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return out;
}

std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RecordError("records file not found: " + path.string(), 0);
    return read_records(in);
}

}  // namespace courtsim
