#include <functional>
#include <random>

#include "doctest.h"
#include "rla/csv_io.hpp"
#include "rla/errors.hpp"

using namespace rla;

namespace {

std::pair<std::size_t, std::size_t> parse_error_at(const std::function<void()>& f) {
    try {
        f();
    } catch (const ParseError& e) {
        return {e.line(), e.column()};
    }
    FAIL("expected a ParseError");
    return {};
}

}  // namespace

TEST_CASE("manifest and tabulation parse") {
    CHECK(parse_manifest("batch_id,size\n1,20\n2,35\n") == Manifest{20, 35});
    CHECK(parse_manifest("batch_id,size\r\n1,20\r\n\r\n2,35") == Manifest{20, 35});
    const Tabulation t = parse_tabulation("batch_id,s_tab,w_tab,l_tab\n1,20,12,7\n2,35,15,18\n");
    CHECK(t == Tabulation{{20, 12, 7}, {35, 15, 18}});
    CHECK_THROWS_AS(parse_tabulation("batch_id,s_tab,w_tab,l_tab\n1,4,2,2\n"), ParseError);
    CHECK(parse_tabulation("batch_id,s_tab,w_tab,l_tab\n1,4,2,2\n", true) == Tabulation{{4, 2, 2}});
}

TEST_CASE("CVR parsing with quoting") {
    const CvrTable t = parse_cvr("row,identifier,w,l\n1,\"A, 1\",1,0\n2,\"say \"\"hi\"\"\",0,1\n3,plain,0,0\n", 4);
    CHECK(t.batch_index == 4);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0] == CvrRow{"A, 1", 1, 0});
    CHECK(t.rows[1].identifier == "say \"hi\"");
    CHECK(t.rows[2] == CvrRow{"plain", 0, 0});
    CHECK(parse_cvr("row,identifier,w,l\n", 1).rows.empty());
    CHECK(parse_cvr("row,identifier,w,l\n1,\"two\nlines\",1,1\n", 1).rows[0].identifier == "two\nlines");
}

TEST_CASE("errors carry line and column") {
    CHECK(parse_error_at([] { parse_manifest("batch_id,size\n1,20\n2,x\n"); }) == std::pair<std::size_t, std::size_t>{3, 3});
    CHECK(parse_error_at([] { parse_manifest("batch_id,size\n2,20\n"); }).first == 2);
    CHECK(parse_error_at([] { parse_manifest("batch,size\n1,20\n"); }).first == 1);
    CHECK(parse_error_at([] { parse_cvr("row,identifier,w,l\n1,a,2,0\n", 1); }) == std::pair<std::size_t, std::size_t>{2, 5});
    CHECK(parse_error_at([] { parse_cvr("row,identifier,w,l\n1,a,1\n", 1); }).first == 2);
    CHECK(parse_error_at([] { parse_cvr("row,identifier,w,l\n2,a,1,0\n", 1); }).first == 2);
    CHECK(parse_error_at([] { parse_cvr("row,identifier,w,l\n1,\"open,1,0\n", 1); }).first == 2);
    CHECK(parse_error_at([] { parse_cvr("row,identifier,w,l\n1,a\"b,1,0\n", 1); }).first == 2);
    CHECK(parse_error_at([] { parse_cvr("row,identifier,w,l\n1,\xff,1,0\n", 1); }).first == 2);
    CHECK(parse_error_at([] { parse_manifest(""); }).first == 1);
    CHECK(parse_error_at([] { parse_tabulation("batch_id,s_tab,w_tab,l_tab\n1,3,-1,0\n"); }).first == 2);
}

TEST_CASE("reserved identifiers are refused on input") {
    CHECK_THROWS_AS(parse_cvr("row,identifier,w,l\n1,__bot:1,1,0\n", 1), ParseError);
    CHECK_THROWS_AS(parse_ballots("batch_id,identifier,w,l\n1,__bot:2,0,0\n"), ParseError);
}

TEST_CASE("group CVR and ballots") {
    const GroupCvrTable g = parse_group_cvr("group,s,w,l\n1,3,2,0\n2,2,0,1\n", 2);
    CHECK(g.batch_index == 2);
    CHECK(g.groups == std::vector<GroupCvrRow>{{3, 2, 0}, {2, 0, 1}});
    CHECK_THROWS_AS(parse_group_cvr("group,s,w,l\n1,1,2,0\n", 1), ParseError);
    const BallotFamily f = parse_ballots("batch_id,identifier,w,l\n2,x,0,1\n1,y,1,0\n1,z,0,0\n");
    CHECK(f.num_batches() == 2);
    CHECK(f.batch(1).size() == 2);
    CHECK(f.batch(2)[0].identifier == "x");
    CHECK_THROWS_AS(parse_ballots("batch_id,identifier,w,l\n2,x,0,1\n"), ParseError);
}

TEST_CASE("parse inverts serialize") {
    std::mt19937_64 rng(1);
    const std::vector<std::string> awkward = {"plain", "with,comma", "with \"quote\"", " edge ", "line\nbreak",
                                              "crlf\r\nend", "unicode é", ""};
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<int> n(0, 6), pick(0, static_cast<int>(awkward.size()) - 1), bit(0, 1);
        CvrTable t{3, {}};
        Manifest m;
        Tabulation tab;
        GroupCvrTable g{3, {}};
        std::vector<std::vector<Ballot>> batches(static_cast<std::size_t>(n(rng) + 1));
        const int rows = n(rng);
        for (int i = 0; i < rows; ++i) {
            t.rows.push_back({awkward[static_cast<std::size_t>(pick(rng))] + std::to_string(i), bit(rng), bit(rng)});
            m.push_back(n(rng));
            tab.push_back({i + 2, i + 1, i});
            g.groups.push_back({2, bit(rng), bit(rng)});
        }
        for (auto& b : batches) b.push_back({awkward[static_cast<std::size_t>(pick(rng))], bit(rng), bit(rng)});
        const BallotFamily f(batches);
        CHECK(parse_cvr(serialize_cvr(t), 3) == t);
        CHECK(parse_group_cvr(serialize_group_cvr(g), 3) == g);
        CHECK(parse_ballots(serialize_ballots(f)) == f);
        if (!m.empty()) {
            CHECK(parse_manifest(serialize_manifest(m)) == m);
            CHECK(parse_tabulation(serialize_tabulation(tab)) == tab);
        }
    }
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field(" x") == "\" x\"");
}
