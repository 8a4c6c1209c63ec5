#include "rla/adversary.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>
#include <utility>

#include "rla/errors.hpp"

namespace rla {

HonestAdversary::HonestAdversary(const BallotFamily& family, GlobalCvr cvr) : cvr_(std::move(cvr)) {
    if (!family.uniquely_labeled()) throw ConfigError("honest adversary needs a uniquely labeled ballot family");
    if (static_cast<int>(cvr_.size()) != family.num_batches()) throw ConfigError("global CVR batch count mismatch");
    index_.resize(cvr_.size());
    for (int beta = 1; beta <= family.num_batches(); ++beta) {
        if (!cvr_[static_cast<std::size_t>(beta - 1)].uniquely_labeled()) {
            throw ConfigError("honest adversary needs a uniquely labeled CVR");
        }
        auto& idx = index_[static_cast<std::size_t>(beta - 1)];
        const auto ballots = family.batch(beta);
        idx.reserve(ballots.size());
        for (std::size_t p = 0; p < ballots.size(); ++p) idx.emplace(ballots[p].identifier, p);
    }
}

CvrTable HonestAdversary::request_cvr(int batch) { return cvr_.at(static_cast<std::size_t>(batch - 1)); }

std::optional<BallotRef> HonestAdversary::request_ballot(const Identifier& identifier, int batch) {
    if (batch < 1 || static_cast<std::size_t>(batch) > index_.size()) return std::nullopt;
    const auto& idx = index_[static_cast<std::size_t>(batch - 1)];
    auto it = idx.find(identifier);
    if (it == idx.end()) return std::nullopt;
    return BallotRef{batch, it->second};
}

std::string_view to_string(Placement placement) noexcept {
    return placement == Placement::Uniform ? "uniform" : "concentrated";
}

Placement placement_from_string(std::string_view name) {
    if (name == "uniform") return Placement::Uniform;
    if (name == "concentrated") return Placement::Concentrated;
    throw ConfigError("unknown placement: " + std::string(name));
}

bool distortion_feasible(const GlobalCvr& cvr, const DistortionSpec& spec) {
    if (spec.o1 < 0 || spec.o2 < 0 || spec.u1 < 0 || spec.u2 < 0 || spec.a < 0 || spec.d < 0) return false;
    std::int64_t s = 0, w = 0, l = 0;
    for (const auto& t : cvr) {
        s += t.size();
        w += t.winner_votes();
        l += t.loser_votes();
    }
    const std::int64_t need = spec.total();
    return w >= need && l >= need && s - w >= need && s - l >= need;
}

namespace {

struct Slot {
    std::size_t batch;
    std::size_t row;
};

// Edits that move the row's net vote by the given amount; nullopt if none fits.
std::optional<std::pair<int, int>> edit_for(const CvrRow& r, int shift) {
    const int w = r.votes_w, l = r.votes_l;
    switch (shift) {
        case 1:
            if (w == 0 && l == 1) return std::pair{0, 0};
            if (w == 0 && l == 0) return std::pair{1, 0};
            if (w == 1 && l == 1) return std::pair{1, 0};
            return std::nullopt;
        case 2:
            if (w == 0 && l == 1) return std::pair{1, 0};
            return std::nullopt;
        case -1:
            if (w == 1 && l == 0) return std::pair{0, 0};
            if (w == 0 && l == 0) return std::pair{0, 1};
            if (w == 1 && l == 1) return std::pair{0, 1};
            return std::nullopt;
        case -2:
            if (w == 1 && l == 0) return std::pair{0, 1};
            return std::nullopt;
        default: return std::nullopt;
    }
}

}  // namespace

DistortionResult apply_distortion(const GlobalCvr& cvr, const DistortionSpec& spec, std::mt19937_64& rng,
                                  Placement placement, const BallotFamily* avoid_labels) {
    if (!distortion_feasible(cvr, spec)) throw ConfigError("infeasible distortion spec");
    DistortionResult out;
    out.cvr = cvr;
    if (spec.zero()) return out;

    std::vector<Slot> order;
    for (std::size_t b = 0; b < cvr.size(); ++b) {
        for (std::size_t r = 0; r < cvr[b].rows.size(); ++r) order.push_back({b, r});
    }
    std::shuffle(order.begin(), order.end(), rng);
    if (placement == Placement::Concentrated && !cvr.empty()) {
        // One random batch takes the errors first; others absorb any overflow.
        std::vector<std::size_t> nonempty;
        for (std::size_t b = 0; b < cvr.size(); ++b) {
            if (!cvr[b].rows.empty()) nonempty.push_back(b);
        }
        if (!nonempty.empty()) {
            const std::size_t target = nonempty[std::uniform_int_distribution<std::size_t>(0, nonempty.size() - 1)(rng)];
            std::stable_partition(order.begin(), order.end(), [target](const Slot& s) { return s.batch == target; });
        }
    }

    std::vector<std::vector<char>> used(cvr.size());
    for (std::size_t b = 0; b < cvr.size(); ++b) used[b].assign(cvr[b].rows.size(), 0);
    std::vector<std::vector<char>> removed = used;

    const auto edit = [&](int shift, std::int64_t count) {
        for (auto it = order.begin(); count > 0 && it != order.end(); ++it) {
            if (used[it->batch][it->row]) continue;
            CvrRow& row = out.cvr[it->batch].rows[it->row];
            auto e = edit_for(row, shift);
            if (!e) continue;
            row.votes_w = e->first;
            row.votes_l = e->second;
            used[it->batch][it->row] = 1;
            --count;
        }
        if (count > 0) throw ConfigError("not enough eligible rows for the distortion spec");
    };
    // Scarcest patterns first so that feasible specs always fit.
    edit(2, spec.o2);
    edit(-2, spec.u2);
    edit(1, spec.o1);
    edit(-1, spec.u1);

    std::int64_t deletions = spec.d;
    for (auto it = order.begin(); deletions > 0 && it != order.end(); ++it) {
        if (used[it->batch][it->row]) continue;
        used[it->batch][it->row] = 1;
        removed[it->batch][it->row] = 1;
        out.deleted.push_back({static_cast<int>(it->batch) + 1, cvr[it->batch].rows[it->row]});
        --deletions;
    }
    if (deletions > 0) throw ConfigError("not enough rows to delete");

    for (std::size_t b = 0; b < out.cvr.size(); ++b) {
        auto& rows = out.cvr[b].rows;
        std::size_t keep = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (removed[b][r]) continue;
            if (keep != r) rows[keep] = std::move(rows[r]);
            ++keep;
        }
        rows.resize(keep);
    }

    if (spec.a > 0) {
        std::unordered_set<std::string> taken;
        for (const auto& t : cvr) {
            for (const auto& r : t.rows) taken.insert(r.identifier);
        }
        if (avoid_labels) {
            for (const auto& batch : avoid_labels->batches()) {
                for (const auto& b : batch) taken.insert(b.identifier);
            }
        }
        const std::size_t focus = order.empty() ? 0 : order.front().batch;
        std::uint64_t counter = 0;
        static constexpr std::pair<int, int> kPatterns[] = {{1, 0}, {0, 1}, {0, 0}};
        for (std::int64_t i = 0; i < spec.a; ++i) {
            Identifier id;
            do {
                id = "added-" + std::to_string(++counter);
            } while (!taken.insert(id).second);
            const auto pattern = kPatterns[std::uniform_int_distribution<int>(0, 2)(rng)];
            std::size_t batch = focus;
            std::size_t total = 0;
            for (const auto& t : out.cvr) total += t.rows.size() + 1;
            if (placement == Placement::Uniform) {
                // Uniform over the gaps of all batches.
                std::size_t pick = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
                for (batch = 0; pick > out.cvr[batch].rows.size(); ++batch) pick -= out.cvr[batch].rows.size() + 1;
                auto& rows = out.cvr[batch].rows;
                rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(pick), CvrRow{id, pattern.first, pattern.second});
            } else {
                auto& rows = out.cvr[batch].rows;
                const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, rows.size())(rng);
                rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(pos), CvrRow{id, pattern.first, pattern.second});
            }
            out.added.push_back(id);
        }
    }
    return out;
}

std::string_view to_string(WithholdPolicy policy) noexcept {
    switch (policy) {
        case WithholdPolicy::Never: return "never";
        case WithholdPolicy::LoserVotes: return "loser_votes";
        case WithholdPolicy::Always: return "always";
    }
    return "never";
}

WithholdPolicy withhold_policy_from_string(std::string_view name) {
    if (name == "never") return WithholdPolicy::Never;
    if (name == "loser_votes") return WithholdPolicy::LoserVotes;
    if (name == "always") return WithholdPolicy::Always;
    throw ConfigError("unknown withhold policy: " + std::string(name));
}

WithholdAdversary::WithholdAdversary(std::unique_ptr<Adversary> base, const BallotFamily& family,
                                     WithholdPolicy policy)
    : base_(std::move(base)), family_(family), policy_(policy) {
    if (!base_) throw ConfigError("withhold adversary needs a base adversary");
}

CvrTable WithholdAdversary::request_cvr(int batch) { return base_->request_cvr(batch); }

std::optional<BallotRef> WithholdAdversary::request_ballot(const Identifier& identifier, int batch) {
    auto ref = base_->request_ballot(identifier, batch);
    if (!ref) return ref;
    switch (policy_) {
        case WithholdPolicy::Never: return ref;
        case WithholdPolicy::Always: return std::nullopt;
        case WithholdPolicy::LoserVotes: {
            const auto ballot = family_.find(*ref);
            if (ballot && ballot->votes_l == 1) return std::nullopt;
            return ref;
        }
    }
    return ref;
}

void WithholdAdversary::observe(const IterationRecord& record) { base_->observe(record); }

BallotFamily relabel_all(const BallotFamily& family, std::string_view label) {
    auto batches = family.batches();
    for (auto& batch : batches) {
        for (auto& b : batch) b.identifier = std::string(label);
    }
    return BallotFamily(std::move(batches));
}

DuplicateLabelAdversary::DuplicateLabelAdversary(const BallotFamily& family, const Manifest& manifest,
                                                 const Tabulation& tabulation) {
    const Normalization norm = normalize_tabulation(manifest, tabulation, AuditMode::Ballot);
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        CvrTable table;
        table.batch_index = static_cast<int>(i) + 1;
        const auto& t = norm.tabulation[i];
        for (std::int64_t r = 0; r < t.s; ++r) {
            table.rows.push_back({std::string(kLabel), r < t.w ? 1 : 0, r >= t.s - t.l ? 1 : 0});
        }
        cvr_.push_back(std::move(table));

        std::optional<std::size_t> best;
        const auto ballots = family.batch(static_cast<int>(i) + 1);
        for (std::size_t p = 0; p < ballots.size(); ++p) {
            if (!best || ballots[p].net() > ballots[*best].net()) best = p;
        }
        best_.push_back(best);
    }
}

CvrTable DuplicateLabelAdversary::request_cvr(int batch) { return cvr_.at(static_cast<std::size_t>(batch - 1)); }

std::optional<BallotRef> DuplicateLabelAdversary::request_ballot(const Identifier&, int batch) {
    if (batch < 1 || static_cast<std::size_t>(batch) > best_.size()) return std::nullopt;
    const auto& best = best_[static_cast<std::size_t>(batch - 1)];
    if (!best) return std::nullopt;
    return BallotRef{batch, *best};
}

DuplicateLabelSetup duplicate_label_attack(const Election& election) {
    Election relabeled(relabel_all(election.family, DuplicateLabelAdversary::kLabel), election.tabulation);
    auto adversary = std::make_unique<DuplicateLabelAdversary>(relabeled.family, relabeled.manifest(),
                                                               relabeled.tabulation);
    return {std::move(relabeled), std::move(adversary)};
}

CvrTable whitewash_table(const CvrTable& canonical, const BatchTally& target, std::mt19937_64& rng) {
    CvrTable out = canonical;
    auto& rows = out.rows;
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> touched(rows.size(), 0);
    std::int64_t w = out.winner_votes();
    std::int64_t l = out.loser_votes();

    // Rewrite one row from pattern `from` to `to`, preferring rows that already
    // disagree with the ballots; false if none is left.
    const auto move = [&](std::pair<int, int> from, std::pair<int, int> to) {
        for (char pass : {1, 0}) {
            for (auto i : order) {
                auto& r = rows[i];
                if (touched[i] != pass || r.votes_w != from.first || r.votes_l != from.second) continue;
                w += to.first - r.votes_w;
                l += to.second - r.votes_l;
                r.votes_w = to.first;
                r.votes_l = to.second;
                touched[i] = 1;
                return true;
            }
        }
        return false;
    };
    while (w < target.w && l > target.l && move({0, 1}, {1, 0})) {}
    while (w > target.w && l < target.l && move({1, 0}, {0, 1})) {}
    while (w < target.w && (move({0, 0}, {1, 0}) || move({0, 1}, {1, 1}))) {}
    while (w > target.w && (move({1, 0}, {0, 0}) || move({1, 1}, {0, 1}))) {}
    while (l < target.l && (move({0, 0}, {0, 1}) || move({1, 0}, {1, 1}))) {}
    while (l > target.l && (move({0, 1}, {0, 0}) || move({1, 1}, {1, 0}))) {}
    return out;
}

WhitewashAdversary::WhitewashAdversary(const Election& election, std::uint64_t seed)
    : canonical_(canonical_cvr(election.family)),
      normalized_(normalize_tabulation(election.manifest(), election.tabulation, AuditMode::Ballot).tabulation),
      honest_(election.family, canonical_),
      rng_(seed) {}

CvrTable WhitewashAdversary::request_cvr(int batch) {
    const auto i = static_cast<std::size_t>(batch - 1);
    if (!triggered_) return canonical_.at(i);
    auto it = whitewashed_.find(batch);
    if (it == whitewashed_.end()) {
        it = whitewashed_.emplace(batch, whitewash_table(canonical_.at(i), normalized_.at(i), rng_)).first;
    }
    return it->second;
}

std::optional<BallotRef> WhitewashAdversary::request_ballot(const Identifier& identifier, int batch) {
    return honest_.request_ballot(identifier, batch);
}

void WhitewashAdversary::observe(const IterationRecord& record) {
    if (record.discrepancy != 0.0) triggered_ = true;
}

HonestGroupAdversary::HonestGroupAdversary(const BallotFamily& family, GlobalCvr cvr, std::int64_t group_size)
    : family_(family), cvr_(std::move(cvr)), group_size_(group_size) {
    if (group_size_ < 1) throw ConfigError("group size must be at least 1");
    if (static_cast<int>(cvr_.size()) != family.num_batches()) throw ConfigError("global CVR batch count mismatch");
}

GroupCvrResponse HonestGroupAdversary::request_group_cvr(int batch) {
    const auto n = static_cast<std::int64_t>(family_.batch(batch).size());
    const auto& rows = cvr_.at(static_cast<std::size_t>(batch - 1)).rows;
    GroupCvrResponse out;
    out.table.batch_index = batch;
    for (std::int64_t start = 0; start < n; start += group_size_) {
        const std::int64_t end = std::min(n, start + group_size_);
        GroupCvrRow g;
        std::vector<std::size_t> members;
        for (std::int64_t p = start; p < end; ++p) {
            members.push_back(static_cast<std::size_t>(p));
            g.s += 1;
            if (p < static_cast<std::int64_t>(rows.size())) {
                g.w += rows[static_cast<std::size_t>(p)].votes_w;
                g.l += rows[static_cast<std::size_t>(p)].votes_l;
            }
        }
        out.table.groups.push_back(g);
        out.partition.push_back(std::move(members));
    }
    return out;
}

std::vector<BallotRef> HonestGroupAdversary::request_group(int batch, std::int64_t group) {
    const auto n = static_cast<std::int64_t>(family_.batch(batch).size());
    std::vector<BallotRef> out;
    const std::int64_t start = (group - 1) * group_size_;
    for (std::int64_t p = start; p < std::min(n, start + group_size_); ++p) {
        out.push_back({batch, static_cast<std::size_t>(p)});
    }
    return out;
}

}  // namespace rla
