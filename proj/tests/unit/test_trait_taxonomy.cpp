#include <doctest.h>

#include <algorithm>
#include <bit>
#include <set>

#include "courtsim/rng.hpp"
#include "courtsim/trait_taxonomy.hpp"

using namespace courtsim;

namespace {

// Independent oracle: subsets by bitmask, orders by std::next_permutation.
std::vector<std::vector<int>> brute(int n, int k, bool ordered) {
    std::vector<std::vector<int>> out;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        std::vector<int> subset;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) subset.push_back(i);
        }
        do {
            out.push_back(subset);
        } while (ordered && std::next_permutation(subset.begin(), subset.end()));
    }
    return out;
}

std::uint64_t choose(int n, int k) {
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

std::uint64_t falling(int n, int k) {
    std::uint64_t r = 1;
    for (int i = 0; i < k; ++i) r *= static_cast<std::uint64_t>(n - i);
    return r;
}

}  // namespace

TEST_CASE("builtin taxonomy") {
    const auto& tax = builtin_taxonomy();
    CHECK(tax.size() == 9);
    CHECK(tax.front().name == "charismatic");
    CHECK(tax.front().archetype == Archetype::Rhetorician);
    CHECK(tax.front().philosophy == "Pathos");
    CHECK(tax.back().name == "methodical");
    CHECK(tax.back().archetype == Archetype::Diplomat);
    CHECK(tax.back().philosophy == "Phronesis");
    for (const auto& t : tax) CHECK(is_valid_trait_name(t.name));
}

TEST_CASE("enumeration sizes") {
    const auto& tax = builtin_taxonomy();
    CHECK(enumerate_combinations(tax, 3).size() == 84);
    CHECK(enumerate_combinations(tax, 9).size() == 1);
    CHECK(enumerate_combinations(tax, 2).size() == 36);
    CHECK(enumerate_permutations(tax, 3).size() == 504);
    CHECK(enumerate_permutations(tax, 1).size() == 9);
    CHECK(enumerate_permutations(tax, 2).size() == 72);
}

TEST_CASE("enumerators match brute force for all n <= 9") {
    const auto all = trait_names(builtin_taxonomy());
    for (int n = 1; n <= 9; ++n) {
        std::vector<std::string> names(all.begin(), all.begin() + n);
        for (int k = 1; k <= n; ++k) {
            CAPTURE(n);
            CAPTURE(k);
            for (bool ordered : {false, true}) {
                auto got = ordered ? enumerate_permutations(names, static_cast<std::size_t>(k))
                                   : enumerate_combinations(names, static_cast<std::size_t>(k));
                auto want = brute(n, k, ordered);
                REQUIRE(got.size() == want.size());
                CHECK(got.size() == (ordered ? falling(n, k) : choose(n, k)));
                std::set<std::vector<std::string>> got_set, want_set;
                for (const auto& s : got) {
                    std::set<std::string> u(s.traits.begin(), s.traits.end());
                    CHECK(u.size() == s.size());
                    CHECK(s.ordered == ordered);
                    got_set.insert(s.traits);
                }
                for (const auto& w : want) {
                    std::vector<std::string> v;
                    for (int i : w) v.push_back(names[static_cast<std::size_t>(i)]);
                    want_set.insert(v);
                }
                CHECK(got_set == want_set);
            }
        }
    }
}

TEST_CASE("trait sets") {
    TraitSet s{{"charismatic", "folksy"}};
    CHECK(s.fingerprint() == "charismatic,folksy");
    CHECK(s.contains("folksy"));
    CHECK_FALSE(s.contains("fol"));
    CHECK_THROWS_AS(validate_trait_set(TraitSet{{"a", "a"}}), TaxonomyError);
    CHECK_THROWS_AS(validate_trait_set(TraitSet{}), TaxonomyError);
    CHECK(is_valid_trait_name("evidence-weaver"));
    CHECK_FALSE(is_valid_trait_name("Bad Name"));
    CHECK_FALSE(is_valid_trait_name(""));
}

TEST_CASE("importance scores") {
    auto one = importance_scores({{"m", {"a", "b", "c"}}});
    CHECK(one.raw_totals.at("a") == 2);
    CHECK(one.raw_totals.at("b") == 1);
    CHECK(one.raw_totals.at("c") == 0);
    CHECK(one.scores.at("a") == 1.0);
    CHECK(one.scores.at("b") == 0.5);
    CHECK(one.scores.at("c") == 0.0);

    auto two = importance_scores({{"m1", {"a", "b", "c"}}, {"m2", {"c", "b", "a"}}});
    for (const char* t : {"a", "b", "c"}) {
        CHECK(two.raw_totals.at(t) == 2);
        CHECK(two.scores.at(t) == 1.0);
    }
    CHECK(importance_scores({}).scores.empty());
}

TEST_CASE("importance scores are permutation invariant") {
    const auto names = trait_names(builtin_taxonomy());
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TraitRanking> rankings;
        for (int r = 0; r < 6; ++r) {
            auto pool = names;
            for (std::size_t i = 0; i < 3; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            rankings.push_back({"m" + std::to_string(r), {pool[0], pool[1], pool[2]}});
        }
        auto shuffled = rankings;
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
        const auto a = importance_scores(rankings);
        const auto b = importance_scores(shuffled);
        CHECK(a.scores == b.scores);
        CHECK(a.raw_totals == b.raw_totals);
    }
}

TEST_CASE("rankings csv") {
    auto r = parse_rankings_csv("model,trait_1,trait_2,trait_3\ngpt,quantitative,methodical,transparent\n");
    REQUIRE(r.size() == 1);
    CHECK(r[0].model == "gpt");
    CHECK(r[0].traits[0] == "quantitative");
    CHECK_THROWS(parse_rankings_csv("model,a,b\n"));
}
