#include "courtsim/trait_taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "courtsim/csv.hpp"

namespace courtsim {

std::string_view to_string(Archetype a) noexcept {
    switch (a) {
        case Archetype::Rhetorician: return "Rhetorician";
        case Archetype::Technician: return "Technician";
        case Archetype::Gladiator: return "Gladiator";
        case Archetype::Diplomat: return "Diplomat";
        case Archetype::Extended: return "Extended";
    }
    return "Extended";
}

Archetype archetype_from_string(std::string_view s) {
    for (auto a : {Archetype::Rhetorician, Archetype::Technician, Archetype::Gladiator,
                   Archetype::Diplomat, Archetype::Extended}) {
        if (to_string(a) == s) return a;
    }
    throw TaxonomyError("unknown archetype \"" + std::string(s) + "\"");
}

bool TraitSet::contains(std::string_view name) const noexcept {
    return std::find(traits.begin(), traits.end(), name) != traits.end();
}

std::string TraitSet::fingerprint() const {
    std::string out;
    for (std::size_t i = 0; i < traits.size(); ++i) {
        if (i) out.push_back(',');
        out += traits[i];
    }
    return out;
}

bool is_valid_trait_name(std::string_view name) noexcept {
    if (name.empty() || name.front() == '-' || name.back() == '-') return false;
    return std::all_of(name.begin(), name.end(), [](char ch) {
        return (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '-';
    });
}

void validate_trait_set(const TraitSet& set) {
    if (set.traits.empty()) throw TaxonomyError("trait set must contain at least one trait");
    std::set<std::string_view> seen;
    for (const auto& t : set.traits) {
        if (!seen.insert(t).second) throw TaxonomyError("duplicate trait \"" + t + "\" in trait set");
    }
}

const std::vector<Trait>& builtin_taxonomy() {
    static const std::vector<Trait> traits = {
        {"charismatic", Archetype::Rhetorician, "Pathos",
         "Appeals to the audience's emotions and rapport to sway judgment beyond mere facts."},
        {"folksy", Archetype::Rhetorician, "Social Virtue",
         "The \"Mean\" of friendliness; appearing as a peer to the jury to foster trust."},
        {"moralistic", Archetype::Rhetorician, "Ethics",
         "Frames the case through the lens of \"The Good,\" focusing on ultimate justice."},
        {"pedantic", Archetype::Technician, "Excess of Exactness",
         "Extreme focus on the \"letter\" of the law, often at the expense of the \"spirit\" or equity."},
        {"quantitative", Archetype::Technician, "Logos",
         "Relies on logical demonstration and hard data to prove a point (Syllogistic reasoning)."},
        {"tenacious", Archetype::Gladiator, "Courage",
         "The virtue of persisting in a difficult course of action despite legal or social pressure."},
        {"provocative", Archetype::Gladiator, "Irascibility",
         "Deliberately stirring up anger or conflict to gain a tactical advantage."},
        {"transparent", Archetype::Diplomat, "Truthfulness",
         "The \"Mean\" between self-deprecation and boastfulness; presenting the case exactly as it is."},
        {"methodical", Archetype::Diplomat, "Phronesis",
         "Using practical wisdom to guide the jury through a complex sequence of cause and effect."},
    };
    return traits;
}

std::vector<std::string> trait_names(const std::vector<Trait>& taxonomy) {
    std::vector<std::string> names;
    names.reserve(taxonomy.size());
    for (const auto& t : taxonomy) names.push_back(t.name);
    return names;
}

namespace {

void check_k(std::size_t n, std::size_t k) {
    if (k < 1 || k > n) {
        throw TaxonomyError("team size " + std::to_string(k) + " out of range [1, " +
                            std::to_string(n) + "]");
    }
}

TraitSet pick(const std::vector<std::string>& names, const std::vector<std::size_t>& idx,
              bool ordered) {
    TraitSet set;
    set.ordered = ordered;
    set.traits.reserve(idx.size());
    for (auto i : idx) set.traits.push_back(names[i]);
    return set;
}

}  // namespace

std::vector<TraitSet> enumerate_combinations(const std::vector<std::string>& names, std::size_t k) {
    const std::size_t n = names.size();
    check_k(n, k);
    std::vector<TraitSet> out;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        out.push_back(pick(names, idx, false));
        // Advance the rightmost index that still has room.
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

std::vector<TraitSet> enumerate_permutations(const std::vector<std::string>& names, std::size_t k) {
    const std::size_t n = names.size();
    check_k(n, k);
    std::vector<TraitSet> out;
    std::vector<std::size_t> idx;
    std::vector<bool> used(n, false);
    idx.reserve(k);

    auto recurse = [&](auto&& self) -> void {
        if (idx.size() == k) {
            out.push_back(pick(names, idx, true));
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            used[i] = true;
            idx.push_back(i);
            self(self);
            idx.pop_back();
            used[i] = false;
        }
    };
    recurse(recurse);
    return out;
}

std::vector<TraitSet> enumerate_combinations(const std::vector<Trait>& taxonomy, std::size_t k) {
    return enumerate_combinations(trait_names(taxonomy), k);
}

std::vector<TraitSet> enumerate_permutations(const std::vector<Trait>& taxonomy, std::size_t k) {
    return enumerate_permutations(trait_names(taxonomy), k);
}

ImportanceTable importance_scores(const std::vector<TraitRanking>& rankings) {
    ImportanceTable table;
    for (const auto& r : rankings) {
        if (r.traits.size() != 3) {
            throw TaxonomyError("ranking must list exactly 3 traits, got " +
                                std::to_string(r.traits.size()));
        }
        validate_trait_set(TraitSet{r.traits, true});
        for (std::size_t pos = 0; pos < 3; ++pos) {
            table.raw_totals[r.traits[pos]] += static_cast<std::int64_t>(2 - pos);
        }
    }
    std::int64_t max_raw = 0;
    for (const auto& [_, raw] : table.raw_totals) max_raw = std::max(max_raw, raw);
    for (const auto& [name, raw] : table.raw_totals) {
        table.scores[name] = max_raw > 0 ? static_cast<double>(raw) / static_cast<double>(max_raw) : 0.0;
    }
    return table;
}

std::vector<TraitRanking> parse_rankings_csv(std::string_view text) {
    auto rows = parse_csv(text);
    std::vector<TraitRanking> out;
    if (rows.empty()) return out;
    const std::vector<std::string> expected = {"model", "trait_1", "trait_2", "trait_3"};
    if (rows.front() != expected) {
        throw TaxonomyError("rankings CSV header must be model,trait_1,trait_2,trait_3");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto& row = rows[i];
        if (row.size() != 4) {
            throw TaxonomyError("rankings CSV line " + std::to_string(i + 1) + ": expected 4 columns");
        }
        out.push_back({row[0], {row[1], row[2], row[3]}});
    }
    return out;
}

std::vector<TraitRanking> load_rankings_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TaxonomyError("rankings file not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_rankings_csv(ss.str());
}

void to_json(nlohmann::json& j, const Trait& t) {
    j = nlohmann::json{{"name", t.name},
                       {"archetype", std::string(to_string(t.archetype))},
                       {"philosophy", t.philosophy},
                       {"behavior", t.behavior}};
}

void from_json(const nlohmann::json& j, Trait& t) {
    t.name = j.at("name").get<std::string>();
    t.archetype = j.contains("archetype")
                      ? archetype_from_string(j.at("archetype").get<std::string>())
                      : Archetype::Extended;
    t.philosophy = j.value("philosophy", std::string{});
    t.behavior = j.value("behavior", std::string{});
}

std::vector<Trait> parse_taxonomy(const nlohmann::json& doc) {
    if (!doc.is_array()) throw TaxonomyError("taxonomy must be a JSON array of traits");
    std::vector<Trait> out;
    std::set<std::string> names;
    for (const auto& entry : doc) {
        Trait t;
        try {
            t = entry.get<Trait>();
        } catch (const nlohmann::json::exception& e) {
            throw TaxonomyError(std::string("malformed trait entry: ") + e.what());
        }
        if (!is_valid_trait_name(t.name)) throw TaxonomyError("invalid trait name \"" + t.name + "\"");
        if (!names.insert(t.name).second) throw TaxonomyError("duplicate trait \"" + t.name + "\"");
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Trait> load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TaxonomyError("taxonomy file not found: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw TaxonomyError("malformed taxonomy " + path.string() + ": " + e.what());
    }
    return parse_taxonomy(doc);
}

void save_taxonomy(const std::vector<Trait>& taxonomy, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw TaxonomyError("cannot write taxonomy: " + path.string());
    out << nlohmann::json(taxonomy).dump(2) << '\n';
}

}  // namespace courtsim
