#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace courtsim {

struct EvidenceItem {
    std::string description;
    bool operator==(const EvidenceItem&) const = default;
};

struct LegalIssue {
    std::string label;
    bool operator==(const LegalIssue&) const = default;
};

/// Structured dispute record: name, summary, evidence and legal issues.
/// `roles` is informational; prosecution and defense are fixed by the protocol.
struct Case {
    std::string id;
    std::string name;
    std::string summary;
    std::vector<EvidenceItem> evidence;
    std::vector<LegalIssue> issues;
    std::vector<std::string> roles;

    bool operator==(const Case&) const = default;
};

struct CaseCorpus {
    std::vector<Case> cases;
    std::optional<std::string> source_path;

    const Case& find(std::string_view id) const;
    const Case* find_if_present(std::string_view id) const noexcept;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated invariants of a single case; empty means the case is valid.
struct CaseValidation {
    std::vector<std::string> violations;
    bool ok() const noexcept { return violations.empty(); }
};

CaseValidation validate_case(const Case& c);

/// Lowercase, hyphen-separated slug of a display name ("State v. John Doe" -> "state-v-john-doe").
std::string slugify(std::string_view name);

/// Deterministic prompt block: name, summary, numbered evidence, numbered issues.
std::string render_case_context(const Case& c);

/// Loads and validates a JSON corpus. Throws CorpusError naming the case id and failing rule.
CaseCorpus load_corpus(const std::filesystem::path& path);
CaseCorpus parse_corpus(const nlohmann::json& doc);
void save_corpus(const CaseCorpus& corpus, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Case& c);
void from_json(const nlohmann::json& j, Case& c);

}  // namespace courtsim
