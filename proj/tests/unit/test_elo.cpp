#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "../support/elo_reference.hpp"
#include "courtsim/elo_engine.hpp"
#include "courtsim/rng.hpp"

using namespace courtsim;

namespace {

const std::vector<std::string> kNames = {"charismatic", "folksy",      "moralistic",  "pedantic",  "quantitative",
                                         "tenacious",   "provocative", "transparent", "methodical"};

TraitSet random_set(Rng& rng, std::size_t k) {
    auto pool = kNames;
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    return TraitSet{{pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)}};
}

VerdictLabel label_of(int i) {
    return i == 0 ? VerdictLabel::guilty : i == 1 ? VerdictLabel::not_guilty : VerdictLabel::undecided;
}

}  // namespace

TEST_CASE("expected score") {
    CHECK(expected_defense_score(1500, 1500) == 0.5);
    CHECK(expected_defense_score(1500, 1900) == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
    CHECK(std::abs(expected_defense_score(1500, 1900) - 0.909091) < 1e-6);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const double p = 1000 + 1000 * rng.uniform(), d = 1000 + 1000 * rng.uniform();
        CHECK(std::abs(expected_defense_score(p, d) - expected_defense_score(p + 400, d + 400)) < 1e-12);
    }
}

TEST_CASE("observed scores and effective k") {
    CHECK(observed_scores(VerdictLabel::not_guilty).defense == 1.0);
    CHECK(observed_scores(VerdictLabel::not_guilty).prosecution == 0.0);
    CHECK(observed_scores(VerdictLabel::guilty).defense == 0.0);
    CHECK(observed_scores(VerdictLabel::guilty).prosecution == 1.0);
    CHECK(observed_scores(VerdictLabel::undecided).defense == 0.5);
    CHECK(effective_k(32, 1.0) == 48);
    CHECK(effective_k(32, 0.0) == 16);
    CHECK(effective_k(32, 0.65) == doctest::Approx(36.8).epsilon(1e-12));
    CHECK_THROWS_AS(effective_k(32, 1.01), std::domain_error);
    CHECK_THROWS_AS(effective_k(32, -0.1), std::domain_error);
}

TEST_CASE("fresh pools, confident acquittal") {
    EloPools pools;
    TraitSet p{{"charismatic", "folksy"}}, d{{"pedantic", "quantitative"}};
    apply_trial(pools, {{VerdictLabel::not_guilty, 1.0}, p, d}, 0);
    for (const auto& t : d.traits) {
        CHECK(pools.overall.rating(t) == 1524);
        CHECK(pools.defense.rating(t) == 1524);
        CHECK_FALSE(pools.prosecution.ratings.count(t));
    }
    for (const auto& t : p.traits) {
        CHECK(pools.overall.rating(t) == 1476);
        CHECK(pools.prosecution.rating(t) == 1476);
        CHECK_FALSE(pools.defense.ratings.count(t));
    }
    auto ranked = rankings(pools.overall);
    CHECK(ranked[0].first == "pedantic");
    CHECK(ranked[1].first == "quantitative");
    CHECK(ranked[3].second == 1476);
}

TEST_CASE("undecided at equal ratings changes nothing") {
    EloPools pools;
    auto updates = apply_trial(pools, {{VerdictLabel::undecided, 0.9}, TraitSet{{"a"}}, TraitSet{{"b"}}}, 0);
    for (const auto& u : updates) CHECK(u.delta == 0.0);
}

TEST_CASE("rankings tie-break and empty pool") {
    EloPool pool;
    CHECK(rankings(pool).empty());
    pool.ratings = {{"tenacious", 1500}, {"charismatic", 1500}, {"folksy", 1500}};
    auto r = rankings(pool);
    CHECK(r[0].first == "charismatic");
    CHECK(r[1].first == "folksy");
    CHECK(r[2].first == "tenacious");
}

TEST_CASE("engine matches the straight-line reference") {
    Rng rng(99);
    std::vector<testing::ReferenceTrial> trials;
    EloPools pools;
    for (int i = 0; i < 20; ++i) {
        const auto p = random_set(rng, 1 + rng.below(3)), d = random_set(rng, 1 + rng.below(3));
        const int label = static_cast<int>(rng.below(3));
        const double c = rng.uniform();
        trials.push_back({p.traits, d.traits, label, c});
        apply_trial(pools, {{label_of(label), c}, p, d}, i);
    }
    const auto ref = testing::reference_replay(trials);
    CHECK(ref.overall.size() == pools.overall.ratings.size());
    for (const auto& [t, r] : ref.overall) CHECK(std::abs(pools.overall.rating(t) - r) < 1e-9);
    for (const auto& [t, r] : ref.prosecution) CHECK(std::abs(pools.prosecution.rating(t) - r) < 1e-9);
    for (const auto& [t, r] : ref.defense) CHECK(std::abs(pools.defense.rating(t) - r) < 1e-9);
}

TEST_CASE("properties over random trials") {
    Rng rng(5);
    EloPools pools;
    std::set<std::string> used_p, used_d;
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 1 + rng.below(3);
        const bool equal = rng.below(2) == 0;
        const auto p = random_set(rng, n), d = random_set(rng, equal ? n : 1 + rng.below(3));
        const double c = rng.uniform();
        used_p.insert(p.traits.begin(), p.traits.end());
        used_d.insert(d.traits.begin(), d.traits.end());
        const auto updates = apply_trial(pools, {{label_of(static_cast<int>(rng.below(3))), c}, p, d}, i);
        double overall_sum = 0;
        for (const auto& u : updates) {
            CHECK(std::abs(u.delta) <= u.k_effective);
            CHECK(u.k_effective <= 48.0);
            if (u.pool == PoolKind::overall) overall_sum += u.delta;
        }
        if (p.size() == d.size()) CHECK(std::abs(overall_sum) < 1e-12);
    }
    for (const auto& [t, _] : pools.prosecution.ratings) CHECK(used_p.count(t));
    for (const auto& [t, _] : pools.defense.ratings) CHECK(used_d.count(t));
    for (PoolKind k : {PoolKind::overall, PoolKind::prosecution_role, PoolKind::defense_role}) {
        CHECK(replay_log(pools.get(k)) == pools.get(k).ratings);
    }
}

TEST_CASE("pool csv and update log") {
    EloPools pools;
    apply_trial(pools, {{VerdictLabel::guilty, 0.5}, TraitSet{{"folksy"}}, TraitSet{{"pedantic"}}}, 7);
    const auto csv = pools_csv(pools);
    CHECK(csv.rfind("pool_kind,trait,rating,n_updates\n", 0) == 0);
    CHECK(csv.find("overall,folksy,1516.000000,1\n") != std::string::npos);
    CHECK(csv.find("defense,pedantic,1484.000000,1\n") != std::string::npos);
    std::ostringstream log;
    write_update_log(log, pools);
    const std::string text = log.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(pool_kind_from_string("prosecution") == PoolKind::prosecution_role);
    CHECK_THROWS(pool_kind_from_string("nope"));
}
