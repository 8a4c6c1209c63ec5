#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "rla/adversary.hpp"
#include "rla/auditor.hpp"
#include "rla/errors.hpp"
#include "rla/simulation.hpp"

using namespace rla;

namespace {

// 20 ballots: 10 winner, 9 loser, 1 blank, so mu = 1/20.
Election five_percent_election() {
    std::vector<std::vector<Ballot>> batches(4);
    int n = 0;
    for (int b = 0; b < 4; ++b) {
        for (int p = 0; p < 5; ++p, ++n) {
            const int w = n < 10 ? 1 : 0;
            const int l = n >= 10 && n < 19 ? 1 : 0;
            batches[static_cast<std::size_t>(b)].push_back({"ballot-" + std::to_string(n), w, l});
        }
    }
    BallotFamily f(std::move(batches));
    Tabulation t = tab_of_cvr(canonical_cvr(f));
    return Election(std::move(f), std::move(t));
}

class CountingAdversary : public Adversary {
public:
    explicit CountingAdversary(Adversary& inner) : inner_(inner) {}
    CvrTable request_cvr(int batch) override {
        ++cvr_requests[batch];
        return inner_.request_cvr(batch);
    }
    std::optional<BallotRef> request_ballot(const Identifier& id, int batch) override {
        return inner_.request_ballot(id, batch);
    }
    std::map<int, int> cvr_requests;

private:
    Adversary& inner_;
};

AuditConfig config_with_seed(std::uint64_t seed) {
    AuditConfig c;
    c.rng_seed = seed;
    return c;
}

}  // namespace

TEST_CASE("honest zero-error audit stops Consistent after 131 iterations for every seed") {
    const Election e = five_percent_election();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (auto kind : {TransformKind::Identity, TransformKind::Force}) {
            HonestAdversary honest(e.family, canonical_cvr(e.family));
            AuditConfig c = config_with_seed(seed);
            c.transform = kind;
            const AuditOutcome out = run_audit(honest, e, c);
            CHECK(out.verdict == Verdict::Consistent);
            CHECK(out.transcript.iterations.size() == 131);
            for (const auto& r : out.transcript.iterations) CHECK(r.discrepancy == 0.0);
        }
    }
}

TEST_CASE("honest rows score zero under every transform") {
    const Election e = five_percent_election();
    const GlobalCvr cvr = canonical_cvr(e.family);
    const Manifest m = e.manifest();
    for (auto kind : {TransformKind::Identity, TransformKind::Force, TransformKind::ForceNoOvervote}) {
        const bool forbid = kind == TransformKind::ForceNoOvervote;
        const Tabulation norm =
            normalize_tabulation(m, e.tabulation, forbid ? AuditMode::BallotNoOvervote : AuditMode::Ballot).tabulation;
        for (int b = 1; b <= e.family.num_batches(); ++b) {
            for (int d : honest_row_discrepancies(m, norm, kind, cvr[static_cast<std::size_t>(b - 1)], e.family, b, forbid)) {
                CHECK(d == 0);
            }
        }
    }
}

TEST_CASE("same seed, same transcript") {
    const Election e = five_percent_election();
    HonestAdversary a(e.family, canonical_cvr(e.family)), b(e.family, canonical_cvr(e.family));
    const AuditOutcome x = run_audit(a, e, config_with_seed(7));
    const AuditOutcome y = run_audit(b, e, config_with_seed(7));
    CHECK(x.transcript == y.transcript);
    CHECK(transcript_digest(x.transcript) == transcript_digest(y.transcript));
    HonestAdversary c(e.family, canonical_cvr(e.family));
    CHECK(transcript_digest(run_audit(c, e, config_with_seed(8)).transcript) != transcript_digest(x.transcript));
}

TEST_CASE("engine rejects out-of-order calls") {
    const Election e = five_percent_election();
    BallotAuditEngine engine(e.manifest(), e.tabulation, config_with_seed(3));
    CHECK(engine.status() == AuditStatus::AwaitingBatch);
    CHECK_THROWS_AS(engine.submit_cvr(CvrTable{1, {}}), StateError);
    CHECK_THROWS_AS(engine.submit_ballot(std::nullopt), StateError);
    const DrawResult d = engine.draw_batch();
    CHECK(engine.status() == AuditStatus::AwaitingCvr);
    CHECK_THROWS_AS(engine.draw_batch(), StateError);
    CHECK_THROWS_AS(engine.submit_ballot(std::nullopt), StateError);
    CHECK_THROWS_AS(engine.submit_cvr(CvrTable{d.batch % 4 + 1, {}}), ConflictError);
    const StepResult s = engine.submit_cvr(canonical_cvr(e.family)[static_cast<std::size_t>(d.batch - 1)]);
    REQUIRE(s.request.has_value());
    CHECK(engine.status() == AuditStatus::AwaitingBallot);
    CHECK(engine.pending_request()->identifier == s.request->identifier);
    CHECK_THROWS_AS(engine.draw_batch(), StateError);
    const IterationRecord r = engine.submit_ballot(std::nullopt);
    CHECK(r.missing);
    CHECK(engine.status() == AuditStatus::AwaitingBatch);
}

TEST_CASE("inconsistent CVR scores 2 with no identifier") {
    const Election e = five_percent_election();
    AuditConfig c = config_with_seed(3);
    c.transform = TransformKind::Identity;
    BallotAuditEngine engine(e.manifest(), e.tabulation, c);
    const DrawResult d = engine.draw_batch();
    const StepResult s = engine.submit_cvr(CvrTable{d.batch, {{"x", 1, 0}}});
    REQUIRE(s.completed.has_value());
    CHECK(s.completed->discrepancy == 2.0);
    CHECK_FALSE(s.completed->identifier.has_value());
    CHECK(s.completed->row >= 1);
    CHECK(engine.status() == AuditStatus::AwaitingBatch);
}

TEST_CASE("reserved labels complete without a ballot request") {
    // One batch of two blank ballots; every forced row gets a reserved label.
    const Election e(BallotFamily({{{"a", 0, 0}, {"b", 0, 0}}}), {{2, 1, 0}});
    BallotAuditEngine engine(e.manifest(), e.tabulation, config_with_seed(1));
    engine.draw_batch();
    const StepResult s = engine.submit_cvr(CvrTable{1, {}});
    REQUIRE(s.completed.has_value());
    CHECK(s.completed->identifier.has_value());
    CHECK(is_reserved_identifier(*s.completed->identifier));
    CHECK(s.completed->missing);
    CHECK(s.completed->discrepancy == (s.completed->row == 2 ? 2.0 : 1.0));
}

TEST_CASE("a missing ballot reads as a loser vote") {
    const Election e = five_percent_election();
    BallotAuditEngine engine(e.manifest(), e.tabulation, config_with_seed(4));
    const DrawResult d = engine.draw_batch();
    CvrTable t = canonical_cvr(e.family)[static_cast<std::size_t>(d.batch - 1)];
    const StepResult s = engine.submit_cvr(t);
    const CvrRow& row = t.rows[static_cast<std::size_t>(s.request->row - 1)];
    const IterationRecord r = engine.submit_ballot(std::nullopt);
    CHECK(r.discrepancy == row.net() + 1);
    CHECK(r.ballot_w == 0);
    CHECK(r.ballot_l == 1);
}

TEST_CASE("mu <= 0 ends Inconclusive before any draw") {
    const Election e(BallotFamily({{{"a", 1, 0}, {"b", 0, 1}}}), {{2, 1, 1}});
    HonestAdversary honest(e.family, canonical_cvr(e.family));
    const AuditOutcome out = run_audit(honest, e, config_with_seed(1));
    CHECK(out.verdict == Verdict::Inconclusive);
    CHECK(out.transcript.iterations.empty());
}

TEST_CASE("rounds request each batch's CVR once per round") {
    const Election e = five_percent_election();
    HonestAdversary honest(e.family, canonical_cvr(e.family));
    CountingAdversary counting(honest);
    AuditConfig c = config_with_seed(5);
    c.rounds = 10;
    const AuditOutcome out = run_audit(counting, e, c);
    CHECK(out.verdict == Verdict::Consistent);
    int requests = 0;
    for (auto [b, n] : counting.cvr_requests) requests += n;
    std::int64_t expected = 0;
    const auto& it = out.transcript.iterations;
    for (std::size_t start = 0; start < it.size(); start += 10) {
        std::map<int, int> seen;
        for (std::size_t i = start; i < std::min(it.size(), start + 10); ++i) seen[it[i].batch] = 1;
        expected += static_cast<std::int64_t>(seen.size());
    }
    CHECK(requests == expected);
    CHECK(requests < static_cast<int>(it.size()));
}

TEST_CASE("restore replays a transcript and rejects tampering") {
    const Election e = five_percent_election();
    AuditConfig c = config_with_seed(6);
    c.ell_max = 40;
    std::mt19937_64 rng(1);
    auto distorted = apply_distortion(canonical_cvr(e.family), DistortionSpec{1, 1, 0, 0, 0, 0}, rng);
    HonestAdversary adv(e.family, distorted.cvr);
    const AuditOutcome out = run_audit(adv, e, c);
    REQUIRE(out.transcript.iterations.size() > 3);

    BallotAuditEngine fresh(e.manifest(), e.tabulation, c);
    fresh.restore(out.transcript.iterations);
    CHECK(fresh.transcript() == out.transcript);
    CHECK(fresh.status() == AuditStatus::Stopped);

    auto tampered = out.transcript.iterations;
    tampered[2].discrepancy = tampered[2].discrepancy == 0.0 ? 1.0 : 0.0;
    BallotAuditEngine other(e.manifest(), e.tabulation, c);
    CHECK_THROWS_AS(other.restore(tampered), IntegrityError);

    auto moved = out.transcript.iterations;
    moved[1].row = moved[1].row % 5 + 1;
    BallotAuditEngine third(e.manifest(), e.tabulation, c);
    CHECK_THROWS_AS(third.restore(moved), IntegrityError);
}

TEST_CASE("audit config validation") {
    AuditConfig c;
    c.mode = AuditMode::Group;
    CHECK_THROWS_AS(BallotAuditEngine({1}, {{1, 1, 0}}, c), ConfigError);
    c = {};
    c.rounds = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(audit_mode_from_string(to_string(AuditMode::BallotNoOvervote)) == AuditMode::BallotNoOvervote);
    CHECK(audit_status_from_string(to_string(AuditStatus::AwaitingBallot)) == AuditStatus::AwaitingBallot);
}
