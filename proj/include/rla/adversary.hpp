#pragma once

// Adversaries for the ballot- and group-comparison games.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "rla/auditor.hpp"
#include "rla/group_auditor.hpp"

namespace rla {

/// Answers every CVR request with the given global CVR and every ballot request
/// with the unique matching ballot.
class HonestAdversary : public Adversary {
public:
    /// Throws ConfigError unless the family and every CVR table are uniquely labeled.
    HonestAdversary(const BallotFamily& family, GlobalCvr cvr);

    CvrTable request_cvr(int batch) override;
    std::optional<BallotRef> request_ballot(const Identifier& identifier, int batch) override;

private:
    GlobalCvr cvr_;
    std::vector<std::unordered_map<Identifier, std::size_t>> index_;
};

/// The (o1, o2, u1, u2, a, d) error model: counts of one- and two-vote
/// overstatements and understatements, added rows and deleted rows.
struct DistortionSpec {
    std::int64_t o1 = 0;
    std::int64_t o2 = 0;
    std::int64_t u1 = 0;
    std::int64_t u2 = 0;
    std::int64_t a = 0;
    std::int64_t d = 0;

    std::int64_t total() const noexcept { return o1 + o2 + u1 + u2 + a + d; }
    std::int64_t errors() const noexcept { return o1 + o2 + u1 + u2; }
    bool zero() const noexcept { return total() == 0; }
    friend bool operator==(const DistortionSpec&, const DistortionSpec&) = default;
};

enum class Placement { Uniform, Concentrated };

std::string_view to_string(Placement placement) noexcept;
Placement placement_from_string(std::string_view name);

/// W, L, S-W and S-L of the CVR must each be at least spec.total().
bool distortion_feasible(const GlobalCvr& cvr, const DistortionSpec& spec);

struct DeletedRow {
    int batch = 0;
    CvrRow row;
};

struct DistortionResult {
    GlobalCvr cvr;
    std::vector<DeletedRow> deleted;
    std::vector<Identifier> added;
};

/// Applies a distortion. Edited and deleted rows are drawn without replacement
/// from the eligible rows (the whole CVR, or one batch first when concentrated).
/// Added rows carry fresh identifiers, a uniform pattern among (1,0), (0,1),
/// (0,0) and a uniform position. Throws ConfigError if infeasible.
DistortionResult apply_distortion(const GlobalCvr& cvr, const DistortionSpec& spec, std::mt19937_64& rng,
                                  Placement placement = Placement::Uniform,
                                  const BallotFamily* avoid_labels = nullptr);

enum class WithholdPolicy { Never, LoserVotes, Always };

std::string_view to_string(WithholdPolicy policy) noexcept;
WithholdPolicy withhold_policy_from_string(std::string_view name);

/// Wraps another adversary and answers "no ballot" instead of producing
/// ballots that the policy selects (by default: ballots showing a loser vote).
class WithholdAdversary : public Adversary {
public:
    WithholdAdversary(std::unique_ptr<Adversary> base, const BallotFamily& family,
                      WithholdPolicy policy = WithholdPolicy::LoserVotes);

    CvrTable request_cvr(int batch) override;
    std::optional<BallotRef> request_ballot(const Identifier& identifier, int batch) override;
    void observe(const IterationRecord& record) override;

private:
    std::unique_ptr<Adversary> base_;
    const BallotFamily& family_;
    WithholdPolicy policy_;
};

/// Labels every ballot with the same identifier, declares CVRs that match the
/// tabulation, and always produces the most favorable ballot of the batch.
class DuplicateLabelAdversary : public Adversary {
public:
    static constexpr std::string_view kLabel = "dup";

    /// `family` must already be relabeled (see relabel_all).
    DuplicateLabelAdversary(const BallotFamily& family, const Manifest& manifest, const Tabulation& tabulation);

    CvrTable request_cvr(int batch) override;
    std::optional<BallotRef> request_ballot(const Identifier& identifier, int batch) override;

private:
    GlobalCvr cvr_;
    std::vector<std::optional<std::size_t>> best_;
};

/// Copy of the family with every identifier replaced by `label`.
BallotFamily relabel_all(const BallotFamily& family, std::string_view label);

struct DuplicateLabelSetup {
    Election election;  ///< the relabeled election the attack is played on
    std::unique_ptr<DuplicateLabelAdversary> adversary;
};

DuplicateLabelSetup duplicate_label_attack(const Election& election);

/// Plays honestly from the canonical CVR until some iteration shows a nonzero
/// discrepancy, then declares for each batch a CVR that matches the tabulation
/// while disagreeing with the ballots on as few rows as possible.
class WhitewashAdversary : public Adversary {
public:
    WhitewashAdversary(const Election& election, std::uint64_t seed);

    CvrTable request_cvr(int batch) override;
    std::optional<BallotRef> request_ballot(const Identifier& identifier, int batch) override;
    void observe(const IterationRecord& record) override;

    bool whitewashing() const noexcept { return triggered_; }

private:
    GlobalCvr canonical_;
    Tabulation normalized_;
    HonestAdversary honest_;
    std::mt19937_64 rng_;
    std::map<int, CvrTable> whitewashed_;  ///< one flattering table per batch, fixed once declared
    bool triggered_ = false;
};

/// Flattering table for one batch: the canonical rows edited to the target
/// totals, preferring two-vote flips so that few rows disagree.
CvrTable whitewash_table(const CvrTable& canonical, const BatchTally& target, std::mt19937_64& rng);

/// Group-mode honest adversary: contiguous groups of `group_size` ballots
/// (the last one may be smaller), subtotals read from the given global CVR at
/// the same positions, and every requested group returned in full.
class HonestGroupAdversary : public GroupAdversary {
public:
    HonestGroupAdversary(const BallotFamily& family, GlobalCvr cvr, std::int64_t group_size);

    GroupCvrResponse request_group_cvr(int batch) override;
    std::vector<BallotRef> request_group(int batch, std::int64_t group) override;

private:
    const BallotFamily& family_;
    GlobalCvr cvr_;
    std::int64_t group_size_;
};

}  // namespace rla
