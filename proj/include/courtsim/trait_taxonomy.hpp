#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace courtsim {

/// Persuasion family. `Extended` holds user or orchestrator supplied traits and
/// never appears in the built-in taxonomy.
enum class Archetype { Rhetorician, Technician, Gladiator, Diplomat, Extended };

std::string_view to_string(Archetype a) noexcept;
Archetype archetype_from_string(std::string_view s);

struct Trait {
    std::string name;
    Archetype archetype = Archetype::Extended;
    std::string philosophy;
    std::string behavior;

    bool operator==(const Trait&) const = default;
};

/// Ordered list of distinct trait names. `ordered` distinguishes permutations
/// (agent assignment order matters) from combinations.
struct TraitSet {
    std::vector<std::string> traits;
    bool ordered = false;

    std::size_t size() const noexcept { return traits.size(); }
    bool contains(std::string_view name) const noexcept;
    /// Comma-joined names in stored order, e.g. "charismatic,folksy".
    std::string fingerprint() const;
    bool operator==(const TraitSet&) const = default;
};

class TaxonomyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws TaxonomyError on an empty set or duplicate names.
void validate_trait_set(const TraitSet& set);
bool is_valid_trait_name(std::string_view name) noexcept;

/// The nine built-in traits in table order.
const std::vector<Trait>& builtin_taxonomy();
std::vector<std::string> trait_names(const std::vector<Trait>& taxonomy);

/// All size-k subsets in lexicographic order of taxonomy positions.
std::vector<TraitSet> enumerate_combinations(const std::vector<Trait>& taxonomy, std::size_t k);
std::vector<TraitSet> enumerate_combinations(const std::vector<std::string>& names, std::size_t k);

/// All size-k arrangements without repetition in lexicographic order of taxonomy positions.
std::vector<TraitSet> enumerate_permutations(const std::vector<Trait>& taxonomy, std::size_t k);
std::vector<TraitSet> enumerate_permutations(const std::vector<std::string>& names, std::size_t k);

/// One model's ordering of three traits, most important first.
struct TraitRanking {
    std::string model;
    std::vector<std::string> traits;
};

struct ImportanceTable {
    std::map<std::string, double> scores;
    std::map<std::string, std::int64_t> raw_totals;
};

/// 2/1/0 points per ranking position, summed per trait, divided by the max total.
ImportanceTable importance_scores(const std::vector<TraitRanking>& rankings);

/// Reads a CSV with header `model,trait_1,trait_2,trait_3`.
std::vector<TraitRanking> load_rankings_csv(const std::filesystem::path& path);
std::vector<TraitRanking> parse_rankings_csv(std::string_view text);

std::vector<Trait> load_taxonomy(const std::filesystem::path& path);
std::vector<Trait> parse_taxonomy(const nlohmann::json& doc);
void save_taxonomy(const std::vector<Trait>& taxonomy, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Trait& t);
void from_json(const nlohmann::json& j, Trait& t);

}  // namespace courtsim
