#include "rla/election.hpp"

#include <algorithm>
#include <unordered_set>

#include "rla/errors.hpp"

namespace rla {

bool is_reserved_identifier(std::string_view id) noexcept {
    return id.substr(0, kReservedPrefix.size()) == kReservedPrefix;
}

Identifier reserved_identifier(std::uint64_t counter) {
    return std::string(kReservedPrefix) + std::to_string(counter);
}

BallotFamily::BallotFamily(std::vector<std::vector<Ballot>> batches) : batches_(std::move(batches)) {
    if (batches_.empty()) throw ConfigError("ballot family needs at least one batch");
    for (std::size_t b = 0; b < batches_.size(); ++b) {
        for (auto& ballot : batches_[b]) {
            if ((ballot.votes_w != 0 && ballot.votes_w != 1) || (ballot.votes_l != 0 && ballot.votes_l != 1)) {
                throw ConfigError("ballot votes must be 0 or 1");
            }
            ballot.batch_index = static_cast<int>(b) + 1;
        }
    }
}

std::span<const Ballot> BallotFamily::batch(int beta) const {
    if (beta < 1 || beta > num_batches()) throw ConfigError("batch index out of range: " + std::to_string(beta));
    return batches_[static_cast<std::size_t>(beta - 1)];
}

std::optional<Ballot> BallotFamily::find(const BallotRef& ref) const {
    if (ref.batch < 1 || ref.batch > num_batches()) return std::nullopt;
    const auto& b = batches_[static_cast<std::size_t>(ref.batch - 1)];
    if (ref.position >= b.size()) return std::nullopt;
    return b[ref.position];
}

const Ballot& BallotFamily::at(const BallotRef& ref) const {
    const auto span = batch(ref.batch);
    if (ref.position >= span.size()) throw ConfigError("ballot position out of range");
    return span[ref.position];
}

std::int64_t BallotFamily::total_size() const noexcept {
    std::int64_t n = 0;
    for (const auto& b : batches_) n += static_cast<std::int64_t>(b.size());
    return n;
}

bool BallotFamily::uniquely_labeled() const {
    std::unordered_set<std::string_view> seen;
    for (const auto& b : batches_) {
        for (const auto& ballot : b) {
            if (!seen.insert(ballot.identifier).second) return false;
        }
    }
    return true;
}

Election::Election(BallotFamily f, Tabulation t) : family(std::move(f)), tabulation(std::move(t)) {
    if (static_cast<int>(tabulation.size()) != family.num_batches()) {
        throw ConfigError("tabulation length does not match batch count");
    }
    for (const auto& t_b : tabulation) {
        if (t_b.s < 0 || t_b.w < 0 || t_b.l < 0) throw ConfigError("tabulation entries must be nonnegative");
    }
}

Manifest Election::manifest() const {
    Manifest m;
    m.reserve(family.batches().size());
    for (const auto& b : family.batches()) m.push_back(static_cast<std::int64_t>(b.size()));
    return m;
}

std::int64_t CvrTable::winner_votes() const noexcept {
    std::int64_t n = 0;
    for (const auto& r : rows) n += r.votes_w;
    return n;
}

std::int64_t CvrTable::loser_votes() const noexcept {
    std::int64_t n = 0;
    for (const auto& r : rows) n += r.votes_l;
    return n;
}

bool CvrTable::uniquely_labeled() const {
    std::vector<std::string_view> ids;
    ids.reserve(rows.size());
    for (const auto& r : rows) ids.push_back(r.identifier);
    std::sort(ids.begin(), ids.end());
    return std::adjacent_find(ids.begin(), ids.end()) == ids.end();
}

Totals actual_totals(const BallotFamily& family) {
    Totals totals;
    for (const auto& b : family.batches()) {
        BatchTally t{static_cast<std::int64_t>(b.size()), 0, 0};
        for (const auto& ballot : b) {
            t.w += ballot.votes_w;
            t.l += ballot.votes_l;
        }
        totals.s += t.s;
        totals.w += t.w;
        totals.l += t.l;
        totals.per_batch.push_back(t);
    }
    return totals;
}

Margins margins(const Election& election) {
    const Totals act = actual_totals(election.family);
    if (act.s == 0) throw ConfigError("empty election");
    std::int64_t w_tab = 0;
    std::int64_t l_tab = 0;
    for (const auto& t : election.tabulation) {
        w_tab += t.w;
        l_tab += t.l;
    }
    Margins m;
    m.mu_tab = Rational(w_tab - l_tab, act.s);
    m.mu_act = Rational(act.w >= act.l ? act.w - act.l : act.l - act.w, act.s);
    m.overall_discrepancy = (w_tab - l_tab) - (act.w - act.l);
    m.valid = act.w > act.l;
    m.tie = w_tab == l_tab;
    return m;
}

int row_discrepancy(const CvrRow& row, std::span<const Ballot> batch) {
    int best = 1;
    for (const auto& ballot : batch) {
        if (ballot.identifier == row.identifier) best = std::min(best, -ballot.net());
    }
    return row.net() + best;
}

std::int64_t batch_discrepancy(const Election& election, int beta) {
    const auto ballots = election.family.batch(beta);
    const auto& t = election.tabulation[static_cast<std::size_t>(beta - 1)];
    std::int64_t actual = 0;
    for (const auto& b : ballots) actual += b.net();
    return (t.w - t.l) - actual;
}

std::int64_t election_discrepancy(const Election& election) {
    std::int64_t d = 0;
    for (int beta = 1; beta <= election.family.num_batches(); ++beta) d += batch_discrepancy(election, beta);
    return d;
}

GlobalCvr canonical_cvr(const BallotFamily& family) {
    if (!family.uniquely_labeled()) throw ConfigError("ballot family is not uniquely labeled");
    GlobalCvr cvr;
    cvr.reserve(family.batches().size());
    for (int beta = 1; beta <= family.num_batches(); ++beta) {
        CvrTable table{beta, {}};
        for (const auto& b : family.batch(beta)) table.rows.push_back({b.identifier, b.votes_w, b.votes_l});
        cvr.push_back(std::move(table));
    }
    return cvr;
}

Tabulation tab_of_cvr(const GlobalCvr& cvr) {
    Tabulation t;
    t.reserve(cvr.size());
    for (const auto& table : cvr) t.push_back({table.size(), table.winner_votes(), table.loser_votes()});
    return t;
}

}  // namespace rla
