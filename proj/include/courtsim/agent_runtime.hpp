#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "courtsim/trait_taxonomy.hpp"

namespace courtsim {

enum class Role { prosecution, defense, judge };

std::string_view to_string(Role r) noexcept;
/// "Prosecution", "Defense", "Judge".
std::string_view display_name(Role r) noexcept;
Role role_from_string(std::string_view s);
Role opponent(Role r);

enum class VerdictLabel { guilty, not_guilty, undecided };

std::string_view to_string(VerdictLabel v) noexcept;
VerdictLabel verdict_label_from_string(std::string_view s);

struct Verdict {
    VerdictLabel label = VerdictLabel::undecided;
    double confidence = 0.0;

    bool operator==(const Verdict&) const = default;
};

struct DecodingParams {
    double temperature = 0.7;
    double top_p = 0.9;
    int max_tokens = 512;

    bool operator==(const DecodingParams&) const = default;
};

/// Throws std::invalid_argument on temperature < 0, top_p outside (0,1] or max_tokens < 1.
void validate(const DecodingParams& d);

struct AgentConfig {
    Role role = Role::prosecution;
    TraitSet traits;
    std::string backend_id;
    DecodingParams decoding;
};

/// The fixed judge traits.
const TraitSet& judge_traits();
AgentConfig make_judge(std::string backend_id, DecodingParams decoding = {});
/// Throws std::invalid_argument if the role/trait constraints do not hold.
void validate(const AgentConfig& agent);

/// Shared system prompt for every role. The judge form reproduces the fixed
/// judge prompt byte for byte, including its "an fair" article.
std::string render_system_prompt(const TraitSet& traits, Role role);

enum class Phase { opening, argument, summary, deliberation };

std::string_view to_string(Phase p) noexcept;
Phase phase_from_string(std::string_view s);

struct Message {
    std::string speaker;
    std::string text;

    bool operator==(const Message&) const = default;
};

/// Routing metadata for a request. Not sent over the wire; used by the
/// scripted backend to key responses.
struct RequestTag {
    Role role = Role::prosecution;
    std::string fingerprint;
    int turn = 0;
    Phase phase = Phase::opening;
    std::optional<std::string> issue;

    bool operator==(const RequestTag&) const = default;
};

struct GenerationRequest {
    std::string system_prompt;
    std::vector<Message> messages;
    DecodingParams decoding;
    std::optional<std::uint64_t> seed;
    RequestTag tag;

    bool operator==(const GenerationRequest&) const = default;
};

/// Stable hash of the prompt content (system prompt and messages).
std::uint64_t content_hash(const GenerationRequest& request);

class BackendError : public std::runtime_error {
public:
    enum class Kind { transport, timeout, status, empty, script };

    BackendError(Kind kind, const std::string& what, int attempts = 1)
        : std::runtime_error(what), kind_(kind), attempts_(attempts) {}

    Kind kind() const noexcept { return kind_; }
    int attempts() const noexcept { return attempts_; }

private:
    Kind kind_;
    int attempts_;
};

/// Text-generation backend. Implementations must tolerate concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
};

/// Table of canned responses keyed "role/fingerprint/turn". A `*` in the
/// fingerprint or turn position matches anything; lookup prefers exact keys.
struct Script {
    std::map<std::string, std::string> entries;
    std::optional<std::uint64_t> fallback_seed;

    static std::string key(Role role, std::string_view fingerprint, int turn);
};

Script load_script(const std::filesystem::path& path);

/// Deterministic given (script, request). Throws BackendError(script) when no
/// entry matches and there is no fallback generator.
std::string scripted_generate(const Script& script, const GenerationRequest& request);

class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
    std::string generate(const GenerationRequest& request) override {
        return scripted_generate(script_, request);
    }
    const Script& script() const noexcept { return script_; }

private:
    Script script_;
};

class BackendRegistry {
public:
    void add(std::string id, std::shared_ptr<Backend> backend);
    Backend& get(std::string_view id) const;
    bool contains(std::string_view id) const;

private:
    std::map<std::string, std::shared_ptr<Backend>, std::less<>> backends_;
};

class VerdictParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parsing ladder: strict JSON object, then the first JSON object with the
/// expected keys anywhere in the text, then a prose pattern. Confidence from
/// JSON is clamped to [0,1]; prose confidences must already lie in [0,1].
std::optional<Verdict> try_parse_verdict(std::string_view text);
Verdict parse_verdict(std::string_view text);

/// Output-format instruction appended to the judge request; later attempts
/// are more explicit.
std::string judge_format_instruction(int attempt);

}  // namespace courtsim
