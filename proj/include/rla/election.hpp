#pragma once

// Ballots, batches, tabulations, cast-vote records and the discrepancy
// arithmetic that the rest of the audit is built on.
//
// Batch indices are 1-based everywhere in the public API (they appear in
// files and transcripts); positions inside a batch are 0-based.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rla/rational.hpp"

namespace rla {

using Identifier = std::string;

/// Prefix of auditor-internal identifiers (the "bottom" labels). Never valid in ingested files.
inline constexpr std::string_view kReservedPrefix = "__bot:";

bool is_reserved_identifier(std::string_view id) noexcept;
Identifier reserved_identifier(std::uint64_t counter);

struct Ballot {
    Identifier identifier;
    int votes_w = 0;
    int votes_l = 0;
    int batch_index = 0;

    int net() const noexcept { return votes_w - votes_l; }
    bool overvote() const noexcept { return votes_w == 1 && votes_l == 1; }
    friend bool operator==(const Ballot&, const Ballot&) = default;
};

/// Physical handle to a ballot: the batch it sits in and its position there.
struct BallotRef {
    int batch = 0;
    std::size_t position = 0;
    friend bool operator==(const BallotRef&, const BallotRef&) = default;
};

class BallotFamily {
public:
    /// Each inner vector is one batch; batch_index fields are (re)assigned from position.
    explicit BallotFamily(std::vector<std::vector<Ballot>> batches);

    int num_batches() const noexcept { return static_cast<int>(batches_.size()); }
    std::span<const Ballot> batch(int beta) const;
    const Ballot& at(const BallotRef& ref) const;
    std::optional<Ballot> find(const BallotRef& ref) const;
    std::int64_t total_size() const noexcept;
    bool uniquely_labeled() const;
    const std::vector<std::vector<Ballot>>& batches() const noexcept { return batches_; }

    friend bool operator==(const BallotFamily&, const BallotFamily&) = default;

private:
    std::vector<std::vector<Ballot>> batches_;
};

struct BatchTally {
    std::int64_t s = 0;
    std::int64_t w = 0;
    std::int64_t l = 0;
    friend bool operator==(const BatchTally&, const BatchTally&) = default;
};

/// Per-batch (S; W, L) triples.
using Tabulation = std::vector<BatchTally>;
/// Trusted per-batch ballot counts.
using Manifest = std::vector<std::int64_t>;

struct Totals {
    std::vector<BatchTally> per_batch;
    std::int64_t s = 0;
    std::int64_t w = 0;
    std::int64_t l = 0;
};

struct Election {
    BallotFamily family;
    Tabulation tabulation;

    Election(BallotFamily f, Tabulation t);
    Manifest manifest() const;
};

struct Margins {
    Rational mu_tab;
    Rational mu_act;
    std::int64_t overall_discrepancy = 0;
    bool valid = false;  ///< W^act > L^act
    bool tie = false;    ///< W^tab == L^tab; such elections are not audited
};

struct CvrRow {
    Identifier identifier;
    int votes_w = 0;
    int votes_l = 0;

    int net() const noexcept { return votes_w - votes_l; }
    bool overvote() const noexcept { return votes_w == 1 && votes_l == 1; }
    friend bool operator==(const CvrRow&, const CvrRow&) = default;
};

struct CvrTable {
    int batch_index = 0;
    std::vector<CvrRow> rows;

    std::int64_t size() const noexcept { return static_cast<std::int64_t>(rows.size()); }
    std::int64_t winner_votes() const noexcept;
    std::int64_t loser_votes() const noexcept;
    bool uniquely_labeled() const;
    friend bool operator==(const CvrTable&, const CvrTable&) = default;
};

/// One table per batch, in batch order.
using GlobalCvr = std::vector<CvrTable>;

Totals actual_totals(const BallotFamily& family);
Margins margins(const Election& election);

/// Row discrepancy against the ballots of its batch; a missing identifier counts as a concealed loser vote.
int row_discrepancy(const CvrRow& row, std::span<const Ballot> batch);

std::int64_t batch_discrepancy(const Election& election, int beta);
std::int64_t election_discrepancy(const Election& election);

GlobalCvr canonical_cvr(const BallotFamily& family);
Tabulation tab_of_cvr(const GlobalCvr& cvr);

}  // namespace rla
