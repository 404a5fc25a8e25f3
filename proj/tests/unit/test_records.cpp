#include <doctest.h>

#include <sstream>

#include "courtsim/debate_protocol.hpp"
#include "courtsim/records.hpp"

using namespace courtsim;

namespace {

TrialRecord sample_record() {
    Case c{"c1", "State v. John Doe", "s", {{"e1"}}, {{"Self-defense"}, {"Assault"}}, {}};
    Script s;
    s.fallback_seed = 1;
    BackendRegistry reg;
    reg.add("scripted", std::make_shared<ScriptedBackend>(s));
    auto r = run_trial(c, TrialConfig{TeamMode::team, TraitSet{{"charismatic", "folksy"}}, TraitSet{{"pedantic"}}, 2,
                                      "scripted", 77},
                       reg);
    r.condition = "team_2traits_2rounds_scripted";
    r.trial_index = 4;
    r.replication = 1;
    return r;
}

}  // namespace

TEST_CASE("record round trip") {
    const auto r = sample_record();
    const auto line = record_line(r);
    std::istringstream in(line + "\n");
    const auto back = read_records(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0].transcript == r.transcript);
    CHECK(back[0].config == r.config);
    CHECK(back[0].condition == r.condition);
    CHECK(back[0].trial_index == 4);
    CHECK(back[0].replication == 1);
    CHECK(record_line(back[0]) == line);
}

TEST_CASE("failed records round trip") {
    auto r = sample_record();
    r.error = "transport failure";
    r.transcript.verdict.reset();
    std::istringstream in(record_line(r) + "\n");
    const auto back = read_records(in);
    CHECK_FALSE(back[0].ok());
    CHECK(*back[0].error == "transport failure");
}

TEST_CASE("malformed line names its number") {
    const auto line = record_line(sample_record());
    std::istringstream in(line + "\n" + line.substr(0, line.size() / 2) + "\n");
    try {
        read_records(in);
        FAIL("expected RecordError");
    } catch (const RecordError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::istringstream empty("");
    CHECK(read_records(empty).empty());
}
