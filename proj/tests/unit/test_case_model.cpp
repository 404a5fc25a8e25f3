#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "courtsim/case_model.hpp"
#include "paths.hpp"

using namespace courtsim;

namespace {

Case doe() {
    return Case{"state-v-john-doe",
                "State v. John Doe",
                "Assault charge after an altercation at work. Defendant claims self-defense.",
                {{"Witness testimony from co-workers"}, {"Security camera footage"}, {"Medical report of victim’s injuries"}},
                {{"Self-defense"}, {"Assault"}},
                {"Prosecution", "Defense", "Judge", "Evidence Analyzer"}};
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("bundled corpus has the ten cases") {
    auto corpus = load_corpus(source_path("data/corpus.json"));
    CHECK(corpus.cases.size() == 10);
    const auto& c = corpus.find("state-v-john-doe");
    CHECK(c.evidence.size() == 3);
    REQUIRE(c.issues.size() == 2);
    CHECK(c.issues[0].label == "Self-defense");
    CHECK(c.issues[1].label == "Assault");
    CHECK(validate_case(corpus.find("greenfield-corp-v-alex-cruz")).ok());
    CHECK_THROWS_AS(corpus.find("nope"), CorpusError);
}

TEST_CASE("single-case corpus and missing id fallback") {
    nlohmann::json doc = nlohmann::json::array({nlohmann::json(doe())});
    doc[0].erase("id");
    auto corpus = parse_corpus(doc);
    REQUIRE(corpus.cases.size() == 1);
    CHECK(corpus.cases[0].id == "state-v-john-doe");
    CHECK(corpus.cases[0].evidence.size() == 3);
}

TEST_CASE("duplicate ids are rejected") {
    auto a = doe();
    a.id = "doe";
    auto b = doe();
    b.id = "doe";
    b.name = "Another";
    nlohmann::json doc = nlohmann::json::array({nlohmann::json(a), nlohmann::json(b)});
    CHECK_THROWS_AS(parse_corpus(doc), CorpusError);
}

TEST_CASE("validate_case violations") {
    auto c = doe();
    c.issues.clear();
    auto v = validate_case(c);
    CHECK_FALSE(v.ok());
    CHECK(std::find(v.violations.begin(), v.violations.end(), "issues non-empty") != v.violations.end());

    c = doe();
    c.evidence.push_back({""});
    v = validate_case(c);
    CHECK(std::find(v.violations.begin(), v.violations.end(), "evidence non-blank") != v.violations.end());

    c = doe();
    c.issues.push_back({"Assault"});
    v = validate_case(c);
    CHECK(std::find(v.violations.begin(), v.violations.end(), "issue labels unique") != v.violations.end());
}

TEST_CASE("render_case_context") {
    const auto c = doe();
    const auto text = render_case_context(c);
    CHECK(text.find("2. Security camera footage\n") != std::string::npos);
    CHECK(text == render_case_context(c));
    for (std::size_t k = 0; k < c.evidence.size(); ++k) {
        CHECK(count(text, std::to_string(k + 1) + ". " + c.evidence[k].description + "\n") == 1);
    }
    for (std::size_t k = 0; k < c.issues.size(); ++k) {
        CHECK(count(text, std::to_string(k + 1) + ". " + c.issues[k].label + "\n") == 1);
    }

    auto one = c;
    one.issues.resize(1);
    const auto t1 = render_case_context(one);
    const auto issues_at = t1.find("Legal issues:\n");
    REQUIRE(issues_at != std::string::npos);
    CHECK(std::count(t1.begin() + static_cast<std::ptrdiff_t>(issues_at), t1.end(), '\n') == 2);
}

TEST_CASE("save/load round trip") {
    auto corpus = load_corpus(source_path("data/corpus.json"));
    const auto dir = scratch_dir("corpus-rt");
    save_corpus(corpus, dir / "c.json");
    auto again = load_corpus(dir / "c.json");
    REQUIRE(again.cases.size() == corpus.cases.size());
    for (std::size_t i = 0; i < corpus.cases.size(); ++i) CHECK(again.cases[i] == corpus.cases[i]);
}

TEST_CASE("slugify") {
    CHECK(slugify("State v. John Doe") == "state-v-john-doe");
    CHECK(slugify("Emily Park v. Phoenix Corp.") == "emily-park-v-phoenix-corp");
}
