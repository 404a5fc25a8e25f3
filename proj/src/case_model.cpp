#include "courtsim/case_model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace courtsim {

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char ch) {
        return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
    });
}

std::vector<std::string> string_array(const nlohmann::json& j, const char* key,
                                      const std::string& where) {
    if (!j.contains(key)) {
        throw CorpusError(where + ": missing field \"" + key + "\"");
    }
    const auto& arr = j.at(key);
    if (!arr.is_array()) {
        throw CorpusError(where + ": field \"" + key + "\" must be an array of strings");
    }
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw CorpusError(where + ": field \"" + key + "\" must be an array of strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

const Case* CaseCorpus::find_if_present(std::string_view id) const noexcept {
    auto it = std::find_if(cases.begin(), cases.end(), [&](const Case& c) { return c.id == id; });
    return it == cases.end() ? nullptr : &*it;
}

const Case& CaseCorpus::find(std::string_view id) const {
    if (const Case* c = find_if_present(id)) return *c;
    throw CorpusError("unknown case id \"" + std::string(id) + "\"");
}

CaseValidation validate_case(const Case& c) {
    CaseValidation result;
    auto& v = result.violations;
    if (is_blank(c.id)) v.emplace_back("id non-empty");
    if (is_blank(c.name)) v.emplace_back("name non-empty");
    if (c.evidence.empty()) v.emplace_back("evidence non-empty");
    if (c.issues.empty()) v.emplace_back("issues non-empty");
    if (std::any_of(c.evidence.begin(), c.evidence.end(),
                    [](const EvidenceItem& e) { return is_blank(e.description); })) {
        v.emplace_back("evidence non-blank");
    }
    if (std::any_of(c.issues.begin(), c.issues.end(),
                    [](const LegalIssue& i) { return is_blank(i.label); })) {
        v.emplace_back("issues non-blank");
    }
    std::set<std::string_view> labels;
    for (const auto& issue : c.issues) {
        if (!labels.insert(issue.label).second) {
            v.emplace_back("issue labels unique");
            break;
        }
    }
    return result;
}

std::string slugify(std::string_view name) {
    std::string out;
    bool pending_hyphen = false;
    for (unsigned char ch : name) {
        if ((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9')) {
            if (pending_hyphen && !out.empty()) out.push_back('-');
            pending_hyphen = false;
            out.push_back(static_cast<char>(ch));
        } else if (ch >= 'A' && ch <= 'Z') {
            if (pending_hyphen && !out.empty()) out.push_back('-');
            pending_hyphen = false;
            out.push_back(static_cast<char>(ch - 'A' + 'a'));
        } else {
            pending_hyphen = true;
        }
    }
    return out;
}

std::string render_case_context(const Case& c) {
    std::string out;
    out += "Case: " + c.name + "\n";
    out += "Summary: " + c.summary + "\n";
    out += "Evidence:\n";
    for (std::size_t i = 0; i < c.evidence.size(); ++i) {
        out += std::to_string(i + 1) + ". " + c.evidence[i].description + "\n";
    }
    out += "Legal issues:\n";
    for (std::size_t i = 0; i < c.issues.size(); ++i) {
        out += std::to_string(i + 1) + ". " + c.issues[i].label + "\n";
    }
    return out;
}

void to_json(nlohmann::json& j, const Case& c) {
    auto evidence = nlohmann::json::array();
    for (const auto& e : c.evidence) evidence.push_back(e.description);
    auto issues = nlohmann::json::array();
    for (const auto& i : c.issues) issues.push_back(i.label);
    j = nlohmann::json{{"id", c.id},
                       {"name", c.name},
                       {"summary", c.summary},
                       {"evidence", std::move(evidence)},
                       {"issues", std::move(issues)},
                       {"roles", c.roles}};
}

void from_json(const nlohmann::json& j, Case& c) {
    if (!j.is_object()) throw CorpusError("case entry must be a JSON object");
    std::string where = "case";
    if (j.contains("name") && j.at("name").is_string()) {
        c.name = j.at("name").get<std::string>();
    } else {
        throw CorpusError("case: missing string field \"name\"");
    }
    if (j.contains("id")) {
        if (!j.at("id").is_string()) throw CorpusError("case \"" + c.name + "\": \"id\" must be a string");
        c.id = j.at("id").get<std::string>();
    } else {
        c.id = slugify(c.name);
    }
    where = "case \"" + c.id + "\"";
    if (!j.contains("summary") || !j.at("summary").is_string()) {
        throw CorpusError(where + ": missing string field \"summary\"");
    }
    c.summary = j.at("summary").get<std::string>();
    c.evidence.clear();
    for (auto& s : string_array(j, "evidence", where)) c.evidence.push_back({std::move(s)});
    c.issues.clear();
    for (auto& s : string_array(j, "issues", where)) c.issues.push_back({std::move(s)});
    c.roles = j.contains("roles") ? string_array(j, "roles", where) : std::vector<std::string>{};
}

CaseCorpus parse_corpus(const nlohmann::json& doc) {
    if (!doc.is_array()) throw CorpusError("corpus must be a top-level JSON array of cases");
    CaseCorpus corpus;
    std::set<std::string> ids;
    for (const auto& entry : doc) {
        Case c = entry.get<Case>();
        auto check = validate_case(c);
        if (!check.ok()) {
            std::string msg = "case \"" + c.id + "\" failed validation:";
            for (const auto& v : check.violations) msg += " [" + v + "]";
            throw CorpusError(msg);
        }
        if (!ids.insert(c.id).second) {
            throw CorpusError("duplicate case id \"" + c.id + "\"");
        }
        corpus.cases.push_back(std::move(c));
    }
    if (corpus.cases.empty()) throw CorpusError("corpus contains no cases");
    return corpus;
}

CaseCorpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("corpus file not found: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError("malformed corpus " + path.string() + ": " + e.what());
    }
    CaseCorpus corpus;
    try {
        corpus = parse_corpus(doc);
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError("malformed corpus " + path.string() + ": " + e.what());
    }
    corpus.source_path = path.string();
    return corpus;
}

void save_corpus(const CaseCorpus& corpus, const std::filesystem::path& path) {
    nlohmann::json doc = corpus.cases;
    std::ofstream out(path);
    if (!out) throw CorpusError("cannot write corpus: " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace courtsim
