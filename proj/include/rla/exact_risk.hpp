#pragma once

// Exact worst-case risk on toy elections.
//
// The audit is an expectimax game: the auditor's randomness (batch and row or
// group draws) averages, the adversary maximizes over its CVR, partition and
// ballot responses. The continuation value only depends on the multiset of
// discrepancies observed so far (plus committed group partitions), so the
// recursion memoizes on that. Every (batch, row) draw has probability exactly
// 1/|B|, hence values scaled by |B|^(ell_max - ell) are integers and the final
// probability is an exact rational.
//
// The KM stopping rule is evaluated with the same floating-point functions
// the auditor uses.

#include <cstdint>
#include <vector>

#include "rla/auditor.hpp"
#include "rla/rational.hpp"

namespace rla {

struct ExactRiskResult {
    Rational probability;       ///< sup over strategies of Pr[Consistent]
    bool auditable = false;     ///< mu > 0 after normalization
    std::int64_t states = 0;    ///< memoized game states
    bool monotone = true;       ///< continuation value never increases with the next discrepancy
    std::int64_t near_ties = 0; ///< terminal states whose log-risk lies within 1e-9 of log(alpha)
};

struct ExactOptions {
    /// Group mode: let the adversary choose a fresh partition at every draw
    /// instead of committing on the first CVR request. This only enlarges the
    /// strategy space, so the result bounds the committed game from above.
    bool group_recommit = false;
};

/// Limits beyond which exact_risk_small refuses an instance.
inline constexpr std::int64_t kExactMaxBallots = 6;
inline constexpr int kExactMaxBatches = 2;
inline constexpr int kExactMaxLength = 8;
inline constexpr std::size_t kExactMaxGroups = 3;

/// Ballot modes: CVR rows carry the batch's ballot identifiers (each at most
/// once in a uniquely labeled table) or labels that match no ballot there;
/// responses are any ballot of the batch carrying the requested label, or
/// none. Identity and ForceNoOvervote also allow a table that fails the check.
///
/// The adversary always answers with the highest-net matching ballot, which is
/// optimal whenever the continuation value is monotone; `monotone` reports
/// that this held on every state visited.
///
/// Group mode: the adversary partitions each batch into at most three groups
/// on the first CVR request, declares any list of (s, w, l) triples, and
/// answers a group request with any subset of the committed group.
/// Sequential audits only; throws ConfigError for rounds or oversized instances.
ExactRiskResult exact_risk_small(const Election& election, const AuditConfig& config,
                                 const ExactOptions& options = {});

/// Exact Pr[Consistent] against an adversary whose answers do not depend on
/// history: `row_discrepancies[b][r]` is the discrepancy of row r of batch b+1.
Rational exact_risk_fixed(const std::vector<std::vector<int>>& row_discrepancies, const AuditConfig& config,
                          const Rational& mu);

/// Consistent CVR row multisets for one batch, as counts over the 12 row types
/// (class, pattern): class 0 = label whose best ballot has net +1, 1 = net 0,
/// 2 = no ballot better than a loser vote; pattern index = 2*w + l.
/// Classes 0 and 1 are capped by the number of such labels available.
std::vector<std::vector<int>> consistent_row_multisets(std::int64_t size, std::int64_t w, std::int64_t l,
                                                       int plus_labels, int zero_labels, bool allow_overvotes);

}  // namespace rla
