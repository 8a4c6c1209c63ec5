#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "rla/adversary.hpp"
#include "rla/errors.hpp"
#include "rla/simulation.hpp"

using namespace rla;

namespace {

// Row positions that differ between two global CVRs, matching rows by identifier.
std::int64_t changed_rows(const GlobalCvr& before, const GlobalCvr& after) {
    std::map<Identifier, CvrRow> old_rows, new_rows;
    for (const auto& t : before) {
        for (const auto& r : t.rows) old_rows[r.identifier] = r;
    }
    for (const auto& t : after) {
        for (const auto& r : t.rows) new_rows[r.identifier] = r;
    }
    std::int64_t n = 0;
    for (const auto& [id, r] : old_rows) {
        auto it = new_rows.find(id);
        if (it == new_rows.end() || !(it->second == r)) ++n;
    }
    for (const auto& [id, r] : new_rows) n += old_rows.count(id) ? 0 : 1;
    return n;
}

Election valid_election(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_valid_election(4, 25, 0.45, 0.35, rng);
}

}  // namespace

TEST_CASE("distortion touches exactly the requested number of rows") {
    const Election e = valid_election(1);
    const GlobalCvr cvr = canonical_cvr(e.family);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<std::int64_t> k(0, 3);
        const DistortionSpec spec{k(rng), k(rng), k(rng), k(rng), k(rng), k(rng)};
        if (!distortion_feasible(cvr, spec)) continue;
        for (auto placement : {Placement::Uniform, Placement::Concentrated}) {
            const DistortionResult d = apply_distortion(cvr, spec, rng, placement, &e.family);
            CHECK(changed_rows(cvr, d.cvr) == spec.total());
            CHECK(static_cast<std::int64_t>(d.deleted.size()) == spec.d);
            CHECK(static_cast<std::int64_t>(d.added.size()) == spec.a);
            // Net change in W-L: overstatements add, understatements subtract.
            std::int64_t before = 0, after = 0;
            for (const auto& t : cvr) before += t.winner_votes() - t.loser_votes();
            for (const auto& t : d.cvr) after += t.winner_votes() - t.loser_votes();
            std::int64_t deleted_net = 0, added_net = 0;
            for (const auto& r : d.deleted) deleted_net += r.row.net();
            for (const auto& t : d.cvr) {
                for (const auto& r : t.rows) {
                    if (r.identifier.rfind("added-", 0) == 0) added_net += r.net();
                }
            }
            CHECK(after - before == spec.o1 + 2 * spec.o2 - spec.u1 - 2 * spec.u2 - deleted_net + added_net);
            for (const auto& t : d.cvr) CHECK(t.uniquely_labeled());
        }
    }
}

TEST_CASE("infeasible distortions are refused") {
    const Election e(BallotFamily({{{"a", 1, 0}, {"b", 0, 1}}}), {{2, 1, 1}});
    const GlobalCvr cvr = canonical_cvr(e.family);
    std::mt19937_64 rng(1);
    CHECK_FALSE(distortion_feasible(cvr, {2, 0, 0, 0, 0, 0}));
    CHECK_THROWS_AS(apply_distortion(cvr, {2, 0, 0, 0, 0, 0}, rng), ConfigError);
    CHECK(apply_distortion(cvr, {}, rng).cvr == cvr);
}

TEST_CASE("honest adversary answers with the matching ballot") {
    const Election e = valid_election(3);
    HonestAdversary honest(e.family, canonical_cvr(e.family));
    const auto& b = e.family.batch(2)[7];
    const auto ref = honest.request_ballot(b.identifier, 2);
    REQUIRE(ref.has_value());
    CHECK(e.family.at(*ref) == b);
    CHECK_FALSE(honest.request_ballot(b.identifier, 1).has_value());
    CHECK_FALSE(honest.request_ballot("nobody", 2).has_value());
    CHECK_THROWS_AS(HonestAdversary(relabel_all(e.family, "x"), canonical_cvr(e.family)), ConfigError);
}

TEST_CASE("duplicate-label adversary declares the tabulation under one label") {
    std::mt19937_64 rng(4);
    const Election e = tied_invalid_election(3, 10, 0.1, rng);
    DuplicateLabelSetup setup = duplicate_label_attack(e);
    for (int b = 1; b <= 3; ++b) {
        const CvrTable t = setup.adversary->request_cvr(b);
        const auto& tab = e.tabulation[static_cast<std::size_t>(b - 1)];
        CHECK(t.size() == tab.s);
        CHECK(t.winner_votes() == tab.w);
        CHECK(t.loser_votes() == tab.l);
        CHECK_FALSE(t.uniquely_labeled());
        const auto ref = setup.adversary->request_ballot("dup", b);
        REQUIRE(ref.has_value());
        CHECK(setup.election.family.at(*ref).net() == 1);
    }
    // The consistency check refuses every such table.
    AuditConfig c;
    c.rng_seed = 1;
    c.transform = TransformKind::Identity;
    c.ell_max = 200;
    const AuditOutcome out = run_audit(*setup.adversary, setup.election, c);
    CHECK(out.verdict == Verdict::Inconclusive);
    for (const auto& r : out.transcript.iterations) CHECK(r.discrepancy == 2.0);
}

TEST_CASE("withhold adversary hides loser ballots") {
    const Election e = valid_election(5);
    auto base = std::make_unique<HonestAdversary>(e.family, canonical_cvr(e.family));
    WithholdAdversary w(std::move(base), e.family);
    for (const auto& b : e.family.batch(1)) {
        const auto ref = w.request_ballot(b.identifier, 1);
        CHECK(ref.has_value() == (b.votes_l == 0));
    }
    auto always = std::make_unique<HonestAdversary>(e.family, canonical_cvr(e.family));
    WithholdAdversary a(std::move(always), e.family, WithholdPolicy::Always);
    CHECK_FALSE(a.request_ballot(e.family.batch(1)[0].identifier, 1).has_value());
    CHECK(withhold_policy_from_string(to_string(WithholdPolicy::Never)) == WithholdPolicy::Never);
}

TEST_CASE("whitewash table hits the target totals") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 500; ++trial) {
        const Election e = valid_election(static_cast<std::uint64_t>(trial) + 10);
        const CvrTable canon = canonical_cvr(e.family)[0];
        std::uniform_int_distribution<std::int64_t> v(0, canon.size());
        const BatchTally target{canon.size(), v(rng), v(rng)};
        const CvrTable out = whitewash_table(canon, target, rng);
        CHECK(out.winner_votes() == target.w);
        CHECK(out.loser_votes() == target.l);
        CHECK(out.size() == canon.size());
        for (std::size_t i = 0; i < out.rows.size(); ++i) CHECK(out.rows[i].identifier == canon.rows[i].identifier);
    }
}

TEST_CASE("whitewash plays honestly until a discrepancy, then keeps one table per batch") {
    std::mt19937_64 rng(7);
    const Election e = tied_invalid_election(2, 10, 0.2, rng);
    WhitewashAdversary w(e, 1);
    CHECK(w.request_cvr(1) == canonical_cvr(e.family)[0]);
    CHECK_FALSE(w.whitewashing());
    IterationRecord r;
    r.discrepancy = 1.0;
    w.observe(r);
    CHECK(w.whitewashing());
    const CvrTable first = w.request_cvr(1);
    CHECK(first.winner_votes() == e.tabulation[0].w);
    CHECK(w.request_cvr(1) == first);
}

TEST_CASE("adversaries answer any request sequence") {
    std::mt19937_64 rng(8);
    const Election e = tied_invalid_election(3, 6, 0.2, rng);
    std::vector<std::unique_ptr<Adversary>> all;
    all.push_back(std::make_unique<HonestAdversary>(e.family, canonical_cvr(e.family)));
    all.push_back(std::make_unique<WhitewashAdversary>(e, 2));
    all.push_back(std::make_unique<WithholdAdversary>(std::make_unique<HonestAdversary>(e.family, canonical_cvr(e.family)),
                                                      e.family));
    DuplicateLabelSetup dup = duplicate_label_attack(e);
    std::uniform_int_distribution<int> batch(1, 3), kind(0, 2);
    for (auto& a : all) {
        for (int i = 0; i < 200; ++i) {
            const int b = batch(rng);
            if (kind(rng) == 0) {
                CHECK(a->request_cvr(b).batch_index == b);
            } else {
                const auto ref = a->request_ballot("b" + std::to_string(b) + "-" + std::to_string(kind(rng) + 1), b);
                if (ref) CHECK(e.family.find(*ref).has_value());
            }
            IterationRecord r;
            r.discrepancy = static_cast<double>(kind(rng));
            a->observe(r);
        }
    }
    for (int b = 1; b <= 3; ++b) CHECK(dup.adversary->request_ballot("anything", b).has_value());
}

TEST_CASE("honest group adversary groups contiguously") {
    const Election e = valid_election(9);
    HonestGroupAdversary g(e.family, canonical_cvr(e.family), 10);
    const GroupCvrResponse r = g.request_group_cvr(1);
    CHECK(r.table.groups.size() == 3);
    CHECK(r.table.groups[2].s == 5);
    CHECK(r.partition[1].front() == 10);
    CHECK(g.request_group(1, 3).size() == 5);
    CHECK(check_group_consistent(e.manifest(), e.tabulation, r.table).ok);
}
