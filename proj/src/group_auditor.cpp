#include "rla/group_auditor.hpp"

#include <algorithm>
#include <utility>

#include "rla/digest.hpp"
#include "rla/errors.hpp"

namespace rla {

bool GroupCvrTable::well_formed() const noexcept {
    return std::all_of(groups.begin(), groups.end(), [](const GroupCvrRow& g) {
        return g.s >= 0 && g.w >= 0 && g.l >= 0 && std::max(g.w, g.l) <= g.s;
    });
}

std::int64_t GroupCvrTable::size() const noexcept {
    std::int64_t n = 0;
    for (const auto& g : groups) n += g.s;
    return n;
}

std::int64_t GroupCvrTable::winner_votes() const noexcept {
    std::int64_t n = 0;
    for (const auto& g : groups) n += g.w;
    return n;
}

std::int64_t GroupCvrTable::loser_votes() const noexcept {
    std::int64_t n = 0;
    for (const auto& g : groups) n += g.l;
    return n;
}

ConsistencyResult check_group_consistent(const Manifest& manifest, const Tabulation& normalized,
                                         const GroupCvrTable& cvr) {
    const int beta = cvr.batch_index;
    if (beta < 1 || static_cast<std::size_t>(beta) > manifest.size() || normalized.size() != manifest.size()) {
        return {false, "batch index out of range"};
    }
    const auto i = static_cast<std::size_t>(beta - 1);
    if (!cvr.well_formed()) return {false, "group CVR is not well formed"};
    if (cvr.size() != manifest[i] || manifest[i] != normalized[i].s) {
        return {false, "group sizes do not sum to the batch size"};
    }
    if (cvr.winner_votes() != normalized[i].w) return {false, "group winner totals differ from tabulation"};
    if (cvr.loser_votes() != normalized[i].l) return {false, "group loser totals differ from tabulation"};
    return {};
}

double group_discrepancy(const GroupCvrRow& declared, const GroupCount& counted) {
    if (counted.size != declared.s || declared.s <= 0) return 2.0;
    return static_cast<double>((declared.w - declared.l) - (counted.w - counted.l)) / static_cast<double>(declared.s);
}

std::string group_cvr_digest(const GroupCvrTable& table) {
    std::string buf = "group-cvr:" + std::to_string(table.batch_index);
    for (const auto& g : table.groups) {
        buf += '\n' + std::to_string(g.s) + ',' + std::to_string(g.w) + ',' + std::to_string(g.l);
    }
    return sha256_hex(buf);
}

GroupAuditEngine::GroupAuditEngine(Manifest manifest, const Tabulation& tabulation, AuditConfig config)
    : manifest_(std::move(manifest)), config_(std::move(config)), rng_(config_.rng_seed) {
    config_.validate();
    if (config_.mode != AuditMode::Group) throw ConfigError("group audit engine needs group mode");
    norm_ = normalize_tabulation(manifest_, tabulation, AuditMode::Group);
    transcript_.seed = config_.rng_seed;
    transcript_.normalized = norm_.tabulation;
    transcript_.mu = norm_.mu;
    if (norm_.auditable) {
        km_ = config_.km(norm_.mu.to_double());
        km_.validate();
    } else {
        status_ = AuditStatus::Stopped;
    }
}

std::optional<Verdict> GroupAuditEngine::verdict() const {
    if (status_ != AuditStatus::Stopped) return std::nullopt;
    return test_.rejected ? Verdict::Consistent : Verdict::Inconclusive;
}

std::optional<GroupRequest> GroupAuditEngine::pending_request() const {
    if (status_ != AuditStatus::AwaitingBallot || !pending_group_) return std::nullopt;
    return GroupRequest{batch_, pending_index_, pending_group_->s};
}

GroupDrawResult GroupAuditEngine::draw_batch() {
    if (status_ != AuditStatus::AwaitingBatch) {
        throw StateError("draw is only valid while awaiting a batch (status " + std::string(to_string(status_)) + ")");
    }
    ++iter_;
    if (config_.rounds && (iter_ - 1) % *config_.rounds == 0) round_cache_.clear();
    batch_ = sample_batch(rng_, manifest_, iter_);
    GroupDrawResult result;
    result.batch = batch_;
    if (auto it = round_cache_.find(batch_); it != round_cache_.end()) {
        result.needs_cvr = false;
        result.step = select_group(it->second);
    } else {
        status_ = AuditStatus::AwaitingCvr;
    }
    return result;
}

GroupStepResult GroupAuditEngine::submit_cvr(const GroupCvrTable& cvr) {
    if (status_ != AuditStatus::AwaitingCvr) {
        throw StateError("CVR submission is only valid while awaiting a CVR (status " +
                         std::string(to_string(status_)) + ")");
    }
    if (cvr.batch_index != batch_) {
        throw ConflictError("CVR is for batch " + std::to_string(cvr.batch_index) + " but batch " +
                            std::to_string(batch_) + " was drawn");
    }
    ReceivedCvr received = receive(cvr);
    if (config_.rounds) {
        auto [it, inserted] = round_cache_.emplace(batch_, std::move(received));
        return select_group(it->second);
    }
    return select_group(received);
}

GroupAuditEngine::ReceivedCvr GroupAuditEngine::receive(const GroupCvrTable& cvr) const {
    ReceivedCvr received;
    if (config_.record_cvr_digests) received.digest = group_cvr_digest(cvr);
    if (check_group_consistent(manifest_, norm_.tabulation, cvr).ok) received.table = cvr;
    return received;
}

void GroupAuditEngine::restore(const std::vector<IterationRecord>& completed,
                               const std::function<std::optional<GroupCvrTable>(int batch)>& round_cvr) {
    if (iter_ != 0) throw StateError("restore needs a fresh engine");
    const auto n = static_cast<std::int64_t>(completed.size());
    for (const auto& rec : completed) {
        if (status_ != AuditStatus::AwaitingBatch) {
            throw IntegrityError("iteration " + std::to_string(rec.iter) + " recorded after the audit stopped");
        }
        ++iter_;
        if (config_.rounds && (iter_ - 1) % *config_.rounds == 0) round_cache_.clear();
        verify_recorded_draw(rng_, manifest_, iter_, rec);
        batch_ = rec.batch;
        if (in_open_round(config_.rounds, iter_, n) && !round_cache_.count(batch_)) {
            std::optional<GroupCvrTable> cvr = round_cvr ? round_cvr(batch_) : std::nullopt;
            if (!cvr) throw IntegrityError("no stored CVR for batch " + std::to_string(batch_) + " in the open round");
            cvr->batch_index = batch_;
            ReceivedCvr received = receive(*cvr);
            if (config_.record_cvr_digests && received.digest != rec.cvr_digest) {
                throw IntegrityError("stored CVR for batch " + std::to_string(batch_) + " does not match iteration " +
                                     std::to_string(iter_));
            }
            round_cache_.emplace(batch_, std::move(received));
        }
        pending_digest_ = rec.cvr_digest;
        finish(rec.row, rec.identifier, rec.ballot_w, rec.ballot_l, rec.missing, rec.discrepancy);
        if (!(transcript_.iterations.back() == rec)) {
            throw IntegrityError("iteration " + std::to_string(iter_) + ": recorded log_risk " +
                                 std::to_string(rec.log_risk) + " does not replay (got " +
                                 std::to_string(test_.log_risk) + ")");
        }
    }
}

GroupStepResult GroupAuditEngine::select_group(const ReceivedCvr& received) {
    const auto size = static_cast<std::uint64_t>(manifest_[static_cast<std::size_t>(batch_ - 1)]);
    // A uniform position in the batch lands in group g with probability S_g / S_beta.
    const auto r = static_cast<std::int64_t>(rng_.below(size, CounterRng::row_slot(static_cast<std::uint64_t>(iter_))));
    pending_digest_ = received.digest;
    GroupStepResult step;
    if (!received.table) {
        step.completed = finish(r + 1, std::nullopt, 0, 0, false, 2.0);
        return step;
    }
    std::int64_t acc = 0;
    std::size_t g = 0;
    while (acc + received.table->groups[g].s <= r) acc += received.table->groups[g++].s;
    pending_group_ = received.table->groups[g];
    pending_index_ = static_cast<std::int64_t>(g) + 1;
    pending_row_ = r + 1;
    status_ = AuditStatus::AwaitingBallot;
    step.request = GroupRequest{batch_, pending_index_, pending_group_->s};
    return step;
}

IterationRecord GroupAuditEngine::submit_count(const GroupCount& counted) {
    if (status_ != AuditStatus::AwaitingBallot || !pending_group_) {
        throw StateError("group count is only valid while awaiting ballots (status " +
                         std::string(to_string(status_)) + ")");
    }
    if (counted.size < 0 || counted.w < 0 || counted.l < 0 || std::max(counted.w, counted.l) > counted.size) {
        throw ConfigError("group count must satisfy 0 <= w, l <= size");
    }
    const GroupCvrRow declared = *std::exchange(pending_group_, std::nullopt);
    return finish(pending_row_, std::to_string(pending_index_), counted.w, counted.l, counted.size != declared.s,
                  group_discrepancy(declared, counted));
}

IterationRecord GroupAuditEngine::finish(std::int64_t row, std::optional<Identifier> identifier, std::int64_t w,
                                         std::int64_t l, bool missing, double discrepancy) {
    test_ = test_step(std::move(test_), discrepancy, km_);
    IterationRecord rec;
    rec.iter = iter_;
    rec.batch = batch_;
    rec.cvr_digest = std::move(pending_digest_);
    pending_digest_.clear();
    rec.row = row;
    rec.identifier = std::move(identifier);
    rec.ballot_w = static_cast<int>(w);
    rec.ballot_l = static_cast<int>(l);
    rec.missing = missing;
    rec.discrepancy = discrepancy;
    rec.log_risk = test_.log_risk;
    transcript_.iterations.push_back(rec);
    status_ = test_.stopped ? AuditStatus::Stopped : AuditStatus::AwaitingBatch;
    return rec;
}

void GroupReferee::commit(int batch, const GroupPartition& partition) {
    if (committed(batch)) return;
    const auto size = physical_.batch(batch).size();
    std::vector<char> seen(size, 0);
    std::size_t covered = 0;
    bool valid = true;
    for (const auto& group : partition) {
        for (auto pos : group) {
            if (pos >= size || seen[pos]) {
                valid = false;
                break;
            }
            seen[pos] = 1;
            ++covered;
        }
    }
    if (valid && covered == size) {
        partitions_.emplace(batch, partition);
    } else {
        partitions_.emplace(batch, std::nullopt);
    }
}

GroupCount GroupReferee::count(int batch, std::int64_t group, const std::vector<BallotRef>& returned) const {
    auto it = partitions_.find(batch);
    if (it == partitions_.end() || !it->second || group < 1 ||
        static_cast<std::size_t>(group) > it->second->size()) {
        return {};
    }
    const auto& members = (*it->second)[static_cast<std::size_t>(group - 1)];
    std::vector<std::size_t> kept;
    for (const auto& ref : returned) {
        if (ref.batch != batch) continue;
        if (std::find(members.begin(), members.end(), ref.position) == members.end()) continue;
        if (std::find(kept.begin(), kept.end(), ref.position) != kept.end()) continue;
        kept.push_back(ref.position);
    }
    GroupCount out;
    const auto ballots = physical_.batch(batch);
    for (auto pos : kept) {
        out.size += 1;
        out.w += ballots[pos].votes_w;
        out.l += ballots[pos].votes_l;
    }
    return out;
}

IterationRecord group_basic_experiment(GroupAdversary& adversary, GroupReferee& referee, GroupAuditEngine& engine) {
    GroupDrawResult draw = engine.draw_batch();
    GroupStepResult step = std::move(draw.step);
    if (draw.needs_cvr) {
        GroupCvrResponse response = adversary.request_group_cvr(draw.batch);
        referee.commit(draw.batch, response.partition);
        response.table.batch_index = draw.batch;
        step = engine.submit_cvr(response.table);
    }
    IterationRecord rec;
    if (step.completed) {
        rec = std::move(*step.completed);
    } else {
        const GroupRequest& req = *step.request;
        rec = engine.submit_count(referee.count(req.batch, req.group, adversary.request_group(req.batch, req.group)));
    }
    adversary.observe(rec);
    return rec;
}

AuditOutcome run_group_audit(GroupAdversary& adversary, const Election& election, const AuditConfig& config) {
    GroupAuditEngine engine(election.manifest(), election.tabulation, config);
    GroupReferee referee(election.family);
    while (engine.status() != AuditStatus::Stopped) group_basic_experiment(adversary, referee, engine);
    return {*engine.verdict(), engine.transcript()};
}

}  // namespace rla
