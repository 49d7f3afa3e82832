#include <doctest.h>

#include "fixtures.hpp"
#include "tgr/plan.hpp"
#include "tgr/rng.hpp"

using namespace tgr;

TEST_CASE("parse the two-path scholarly plan") {
    auto outcome = parse_plan(fixtures::kF1GoldPlan);
    REQUIRE(outcome.ok());
    const auto& g = outcome.graph();
    REQUIRE(g.paths().size() == 2);
    CHECK(g.target_category() == "Paper");
    // canonical order sorts Field-of-Study before Institution
    const auto& p0 = g.paths()[0];
    const auto& p1 = g.paths()[1];
    CHECK(p0.nodes.size() == 2);
    CHECK(p0.nodes[0].category == "Field-of-Study");
    CHECK(p0.nodes[0].restriction == "Stellar Populations");
    CHECK(p1.nodes.size() == 3);
    CHECK(p1.nodes[0].category == "Institution");
    CHECK(p1.nodes[0].restriction == "Point Park University");
    CHECK(p1.nodes[1].category == "Author");
    CHECK_FALSE(p1.nodes[1].restriction.has_value());
}

TEST_CASE("minimal single-node plan") {
    auto outcome = parse_plan("Paper");
    REQUIRE(outcome.ok());
    CHECK(outcome.graph().paths().size() == 1);
    CHECK(outcome.graph().paths()[0].nodes.size() == 1);
    CHECK_FALSE(outcome.graph().paths()[0].nodes[0].restriction.has_value());
}

TEST_CASE("syntax violations come back Invalid") {
    CHECK_FALSE(parse_plan("").ok());
    auto dangling = parse_plan("Author -> ; Paper");
    REQUIRE_FALSE(dangling.ok());
    CHECK(dangling.reason() == "dangling arrow");
    CHECK_FALSE(parse_plan("-> Paper").ok());
    CHECK_FALSE(parse_plan("Institution<unterminated -> Author").ok());
    CHECK_FALSE(parse_plan("Institution<> -> Author").ok());
    CHECK_FALSE(parse_plan("Institution<x>junk -> Author").ok());
    auto mixed = parse_plan("Institution -> Author ; Field-of-Study -> Paper");
    REQUIRE_FALSE(mixed.ok());
    CHECK(mixed.reason().find("mixed target categories") != std::string::npos);
}

TEST_CASE("reverse arrows normalize to source->target") {
    auto reversed = parse_plan("Paper <- Author <- Institution<Point Park University>");
    REQUIRE(reversed.ok());
    const auto& path = reversed.graph().paths()[0];
    REQUIRE(path.nodes.size() == 3);
    CHECK(path.nodes[0].category == "Institution");
    CHECK(path.nodes[2].category == "Paper");

    // The converging chain from the running example splits into two paths.
    auto converging = parse_plan(
        "Institution<Point Park University> -> Author -> Paper <- "
        "Field-of-Study<Stellar Populations>");
    REQUIRE(converging.ok());
    CHECK(converging.graph() == parse_plan(fixtures::kF1GoldPlan).graph());
}

TEST_CASE("serialize produces the canonical sorted form") {
    auto g = parse_plan(fixtures::kF1GoldPlan).graph();
    CHECK(serialize_plan(g) ==
          "Field-of-Study<Stellar Populations> -> Paper ; "
          "Institution<Point Park University> -> Author -> Paper");
    CHECK(serialize_plan(parse_plan("Paper").graph()) == "Paper");
}

TEST_CASE("round trip is exact") {
    const char* cases[] = {
        "Paper",
        fixtures::kF1GoldPlan,
        "Author -> Paper",
        "Field-of-Study<a \\> b> -> Paper",
        "Institution<x \\; y<z\\>> -> Author -> Paper",
    };
    for (const char* text : cases) {
        CAPTURE(text);
        auto first = parse_plan(text);
        REQUIRE(first.ok());
        auto second = parse_plan(serialize_plan(first.graph()));
        REQUIRE(second.ok());
        CHECK(first.graph() == second.graph());
    }
}

TEST_CASE("round trip survives adversarial restriction content") {
    // Build graphs directly so restrictions can hold every special character.
    const std::string nasty[] = {">", "<", ";", "\\", "a->b", "x \\ y", "-", "a>b<c;d\\e->f"};
    for (const auto& r : nasty) {
        CAPTURE(r);
        ReasoningPath p{{PathNode{"Paper", r}}};
        auto g = PlanningGraph::make({p});
        auto back = parse_plan(serialize_plan(g));
        REQUIRE(back.ok());
        CHECK(back.graph() == g);
    }
}

TEST_CASE("duplicate paths collapse") {
    auto g = parse_plan("Author -> Paper ; Author -> Paper").graph();
    CHECK(g.paths().size() == 1);
}

TEST_CASE("validate_plan against the fixture schema") {
    auto kb = fixtures::f1();
    auto g = parse_plan(fixtures::kF1GoldPlan).graph();
    CHECK(validate_plan(g, kb).ok());

    auto bad_cat = parse_plan("Venue -> Paper").graph();
    auto outcome = validate_plan(bad_cat, kb);
    REQUIRE_FALSE(outcome.ok());
    CHECK(outcome.reason() == "unknown category Venue");

    auto long_path =
        parse_plan("Institution -> Author -> Paper -> Author -> Paper").graph();
    auto too_long = validate_plan(long_path, kb, 3);
    REQUIRE_FALSE(too_long.ok());
    CHECK(too_long.reason().find("path too long") != std::string::npos);
}

TEST_CASE("template planner") {
    std::vector<TemplateRule> rules = {
        {"publications by {inst} authors on {field}",
         "Institution<{inst}> -> Author -> Paper ; Field-of-Study<{field}> -> Paper"},
        {"papers about {field}", "Field-of-Study<{field}> -> Paper"},
    };
    SUBCASE("captures fill restrictions") {
        auto outcome = plan_template(fixtures::kF1Query, rules);
        REQUIRE(outcome.ok());
        const auto& g = outcome.graph();
        REQUIRE(g.paths().size() == 2);
        CHECK(g.paths()[1].nodes[0].restriction == "Point Park University");
        CHECK(g.paths()[0].nodes[0].restriction == "stellar populations in tidal tails");
        CHECK(g.target_category() == "Paper");
    }
    SUBCASE("first matching rule wins") {
        auto outcome =
            plan_template("publications by X authors on papers about Y", rules);
        REQUIRE(outcome.ok());
        CHECK(outcome.graph().paths().size() == 2); // rule 1, not rule 2
    }
    SUBCASE("no match is Invalid") {
        auto outcome = plan_template("what is the airspeed of an unladen swallow", rules);
        REQUIRE_FALSE(outcome.ok());
        CHECK(outcome.reason() == "no matching template");
        CHECK_FALSE(plan_template("anything", {}).ok());
    }
    SUBCASE("matching is case-insensitive on literals") {
        auto outcome = plan_template("Papers About stellar populations", rules);
        REQUIRE(outcome.ok());
        CHECK(outcome.graph().paths()[0].nodes[0].restriction == "stellar populations");
    }
    SUBCASE("captured specials are escaped into the skeleton") {
        auto outcome = plan_template("papers about a<b>c", rules);
        REQUIRE(outcome.ok());
        CHECK(outcome.graph().paths()[0].nodes[0].restriction == "a<b>c");
    }
}

TEST_CASE("validate_plan does not mutate its input") {
    auto kb = fixtures::f1();
    auto g = parse_plan(fixtures::kF1GoldPlan).graph();
    auto copy = g;
    (void)validate_plan(g, kb);
    (void)validate_plan(parse_plan("Venue -> Paper").graph(), kb);
    CHECK(g == copy);
}
