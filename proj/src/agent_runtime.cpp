#include "courtsim/agent_runtime.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "courtsim/rng.hpp"

namespace courtsim {

std::string_view to_string(Role r) noexcept {
    switch (r) {
        case Role::prosecution: return "prosecution";
        case Role::defense: return "defense";
        case Role::judge: return "judge";
    }
    return "judge";
}

std::string_view display_name(Role r) noexcept {
    switch (r) {
        case Role::prosecution: return "Prosecution";
        case Role::defense: return "Defense";
        case Role::judge: return "Judge";
    }
    return "Judge";
}

Role role_from_string(std::string_view s) {
    if (s == "prosecution") return Role::prosecution;
    if (s == "defense") return Role::defense;
    if (s == "judge") return Role::judge;
    throw std::invalid_argument("unknown role \"" + std::string(s) + "\"");
}

Role opponent(Role r) {
    if (r == Role::judge) throw std::invalid_argument("the judge has no opponent");
    return r == Role::prosecution ? Role::defense : Role::prosecution;
}

std::string_view to_string(VerdictLabel v) noexcept {
    switch (v) {
        case VerdictLabel::guilty: return "guilty";
        case VerdictLabel::not_guilty: return "not_guilty";
        case VerdictLabel::undecided: return "undecided";
    }
    return "undecided";
}

VerdictLabel verdict_label_from_string(std::string_view s) {
    if (s == "guilty") return VerdictLabel::guilty;
    if (s == "not_guilty") return VerdictLabel::not_guilty;
    if (s == "undecided") return VerdictLabel::undecided;
    throw std::invalid_argument("unknown verdict label \"" + std::string(s) + "\"");
}

std::string_view to_string(Phase p) noexcept {
    switch (p) {
        case Phase::opening: return "opening";
        case Phase::argument: return "argument";
        case Phase::summary: return "summary";
        case Phase::deliberation: return "deliberation";
    }
    return "opening";
}

Phase phase_from_string(std::string_view s) {
    if (s == "opening") return Phase::opening;
    if (s == "argument") return Phase::argument;
    if (s == "summary") return Phase::summary;
    if (s == "deliberation") return Phase::deliberation;
    throw std::invalid_argument("unknown phase \"" + std::string(s) + "\"");
}

void validate(const DecodingParams& d) {
    if (!(d.temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    if (!(d.top_p > 0.0 && d.top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
    if (d.max_tokens < 1) throw std::invalid_argument("max_tokens must be positive");
}

const TraitSet& judge_traits() {
    static const TraitSet traits{{"fair", "ethical"}, true};
    return traits;
}

AgentConfig make_judge(std::string backend_id, DecodingParams decoding) {
    return AgentConfig{Role::judge, judge_traits(), std::move(backend_id), decoding};
}

void validate(const AgentConfig& agent) {
    validate(agent.decoding);
    if (agent.role == Role::judge) {
        if (agent.traits.traits != judge_traits().traits) {
            throw std::invalid_argument("judge must hold exactly the traits (fair, ethical)");
        }
        return;
    }
    validate_trait_set(agent.traits);
    if (agent.traits.size() > 9) throw std::invalid_argument("an advocate holds at most 9 traits");
}

std::string render_system_prompt(const TraitSet& traits, Role role) {
    std::string joined;
    for (std::size_t i = 0; i < traits.traits.size(); ++i) {
        if (i) joined += ", ";
        joined += traits.traits[i];
    }
    std::string article = "a";
    if (role == Role::judge) {
        article = "an";
    } else if (!joined.empty() && std::string_view("aeiouAEIOU").find(joined.front()) != std::string_view::npos) {
        article = "an";
    }
    return fmt::format(
        "You are {0} {1} {2} Agent in a court case. Your role is to contribute to the trial by "
        "providing arguments, responses, or decisions based on the context of the case. Adopt a "
        "tone that reflects your personality as {0} {1} {3}. Be super concise.",
        article, joined, display_name(role), to_string(role));
}

std::uint64_t content_hash(const GenerationRequest& request) {
    std::uint64_t h = fnv1a(request.system_prompt);
    for (const auto& m : request.messages) {
        h = fnv1a("\x1f", h);
        h = fnv1a(m.speaker, h);
        h = fnv1a("\x1e", h);
        h = fnv1a(m.text, h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Scripted backend

std::string Script::key(Role role, std::string_view fingerprint, int turn) {
    return fmt::format("{}/{}/{}", to_string(role), fingerprint, turn);
}

Script load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BackendError(BackendError::Kind::script, "script file not found: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw BackendError(BackendError::Kind::script,
                           "malformed script " + path.string() + ": " + e.what());
    }
    Script script;
    // Either a bare key->text map or {"entries": {...}, "fallback_seed": n}.
    const nlohmann::json* entries = &doc;
    if (doc.is_object() && doc.contains("entries")) {
        entries = &doc.at("entries");
        if (doc.contains("fallback_seed") && !doc.at("fallback_seed").is_null()) {
            script.fallback_seed = doc.at("fallback_seed").get<std::uint64_t>();
        }
    }
    if (!entries->is_object()) {
        throw BackendError(BackendError::Kind::script, "script entries must be a JSON object");
    }
    for (const auto& [k, v] : entries->items()) {
        if (!v.is_string()) {
            throw BackendError(BackendError::Kind::script, "script entry \"" + k + "\" is not a string");
        }
        script.entries.emplace(k, v.get<std::string>());
    }
    return script;
}

namespace {

constexpr std::array<std::string_view, 32> kLexicon = {
    "the",      "record",    "shows",     "evidence", "clearly",   "establishes", "doubt",
    "witness",  "testimony", "supports",  "intent",   "reasonable", "standard",   "burden",
    "proof",    "facts",     "timeline",  "contradicts", "claim",   "credible",    "court",
    "must",     "consider",  "context",   "weighs",   "against",   "favor",       "client",
    "conduct",  "law",       "precedent", "therefore"};

std::string fallback_text(std::uint64_t fallback_seed, const GenerationRequest& request) {
    const std::uint64_t seed =
        derive_seed(derive_seed(fallback_seed, request.seed.value_or(0)), content_hash(request));
    Rng rng(seed);
    const auto& tag = request.tag;
    if (tag.role == Role::judge) {
        const bool guilty = rng.below(2) == 0;
        const auto cents = 50 + rng.below(51);  // confidence 0.50 .. 1.00
        return fmt::format("{{\"verdict\":\"{}\",\"confidence\":{}.{:02d}}}",
                           guilty ? "guilty" : "not guilty", cents / 100, cents % 100);
    }
    std::string text = fmt::format("{} ({}) {}", display_name(tag.role), tag.fingerprint,
                                   to_string(tag.phase));
    if (tag.issue) text += " on " + *tag.issue;
    text += ":";
    const auto words = 8 + rng.below(9);
    for (std::uint64_t i = 0; i < words; ++i) {
        text.push_back(' ');
        text += kLexicon[rng.below(kLexicon.size())];
    }
    text.push_back('.');
    return text;
}

}  // namespace

std::string scripted_generate(const Script& script, const GenerationRequest& request) {
    const auto& tag = request.tag;
    const std::string turn = std::to_string(tag.turn);
    const std::array<std::string, 4> candidates = {
        Script::key(tag.role, tag.fingerprint, tag.turn),
        fmt::format("{}/{}/*", to_string(tag.role), tag.fingerprint),
        fmt::format("{}/*/{}", to_string(tag.role), turn),
        fmt::format("{}/*/*", to_string(tag.role)),
    };
    for (const auto& k : candidates) {
        if (auto it = script.entries.find(k); it != script.entries.end()) return it->second;
    }
    if (script.fallback_seed) return fallback_text(*script.fallback_seed, request);
    throw BackendError(BackendError::Kind::script, "no script entry for \"" + candidates[0] + "\"");
}

void BackendRegistry::add(std::string id, std::shared_ptr<Backend> backend) {
    if (!backend) throw std::invalid_argument("null backend for id \"" + id + "\"");
    backends_[std::move(id)] = std::move(backend);
}

Backend& BackendRegistry::get(std::string_view id) const {
    auto it = backends_.find(id);
    if (it == backends_.end()) throw std::invalid_argument("unknown backend \"" + std::string(id) + "\"");
    return *it->second;
}

bool BackendRegistry::contains(std::string_view id) const { return backends_.find(id) != backends_.end(); }

// ---------------------------------------------------------------------------
// Verdict parsing

namespace {

std::optional<VerdictLabel> normalize_label(std::string_view raw) {
    std::string s;
    bool space = false;
    for (char ch : raw) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (c == '_' || c == '-' || c == ' ' || c == '\t') {
            space = true;
            continue;
        }
        if (space && !s.empty()) s.push_back(' ');
        space = false;
        s.push_back(c);
    }
    if (s == "guilty") return VerdictLabel::guilty;
    if (s == "not guilty") return VerdictLabel::not_guilty;
    if (s == "undecided") return VerdictLabel::undecided;
    return std::nullopt;
}

std::optional<Verdict> from_object(const nlohmann::json& obj) {
    if (!obj.is_object()) return std::nullopt;
    auto v = obj.find("verdict");
    auto c = obj.find("confidence");
    if (v == obj.end() || c == obj.end() || !v->is_string()) return std::nullopt;
    auto label = normalize_label(v->get_ref<const std::string&>());
    if (!label) return std::nullopt;
    double conf;
    if (c->is_number()) {
        conf = c->get<double>();
    } else if (c->is_string()) {
        try {
            std::size_t used = 0;
            const auto& str = c->get_ref<const std::string&>();
            conf = std::stod(str, &used);
            if (used != str.size()) return std::nullopt;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (!std::isfinite(conf)) return std::nullopt;
    return Verdict{*label, std::clamp(conf, 0.0, 1.0)};
}

std::optional<Verdict> parse_json_object(std::string_view text) {
    auto doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    return from_object(doc);
}

// End offset (exclusive) of the balanced object starting at `open`, if any.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char ch = text[i];
        if (in_string) {
            if (ch == '\\') {
                ++i;
            } else if (ch == '"') {
                in_string = false;
            }
            continue;
        }
        if (ch == '"') {
            in_string = true;
        } else if (ch == '{') {
            ++depth;
        } else if (ch == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

std::optional<double> to_confidence(const std::string& number, bool percent) {
    double value;
    try {
        value = std::stod(number);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (percent) value /= 100.0;
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) return std::nullopt;
    return value;
}

std::optional<Verdict> parse_prose(const std::string& text) {
    static const std::regex label_re(R"(\b(not[\s_-]*guilty|guilty|undecided)\b)",
                                     std::regex::icase);
    static const std::regex keyed_re(R"(confidence[^0-9.]{0,24}?(\d+(?:\.\d+)?|\.\d+)\s*(%)?)",
                                     std::regex::icase);
    static const std::regex number_re(R"((\d+(?:\.\d+)?|\.\d+)\s*(%)?)");

    std::smatch m;
    if (!std::regex_search(text, m, label_re)) return std::nullopt;
    auto label = normalize_label(m[1].str());
    if (!label) return std::nullopt;

    std::optional<double> conf;
    if (std::regex_search(text, m, keyed_re)) {
        conf = to_confidence(m[1].str(), m[2].matched);
    }
    if (!conf) {
        for (auto it = std::sregex_iterator(text.begin(), text.end(), number_re);
             it != std::sregex_iterator(); ++it) {
            if ((conf = to_confidence((*it)[1].str(), (*it)[2].matched))) break;
        }
    }
    if (!conf) return std::nullopt;
    return Verdict{*label, *conf};
}

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<Verdict> try_parse_verdict(std::string_view text) {
    if (auto v = parse_json_object(trim(text))) return v;

    for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
        auto end = balanced_end(text, open);
        if (!end) continue;
        if (auto v = parse_json_object(text.substr(open, *end - open))) return v;
    }

    return parse_prose(std::string(text));
}

Verdict parse_verdict(std::string_view text) {
    if (auto v = try_parse_verdict(text)) return *v;
    std::string preview(text.substr(0, 80));
    throw VerdictParseError("could not parse a verdict from judge output: \"" + preview + "\"");
}

std::string judge_format_instruction(int attempt) {
    switch (attempt) {
        case 1:
            return "Deliver your verdict on the case. Respond with a JSON object of the form "
                   "{\"verdict\": \"guilty\" | \"not guilty\" | \"undecided\", \"confidence\": "
                   "<number between 0 and 1>}.";
        case 2:
            return "Your previous answer could not be read. Reply with only the JSON object "
                   "{\"verdict\": \"guilty\" | \"not guilty\" | \"undecided\", \"confidence\": "
                   "<number between 0 and 1>} and no other text.";
        default:
            return "FORMAT REMINDER: output exactly one line of JSON such as "
                   "{\"verdict\": \"not guilty\", \"confidence\": 0.65}. No prose, no markdown, "
                   "no code fences.";
    }
}

}  // namespace courtsim
