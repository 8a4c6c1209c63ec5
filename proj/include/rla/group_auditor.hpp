#pragma once

// Adaptive group-comparison auditor.
//
// Ballots carry no usable identifiers here: the adversary partitions a batch
// into groups when its CVR is first requested, declares (size, W, L) for each
// group, and a sampled group is hand counted in full. The partition is
// tracked by the referee (group_basic_experiment), not by the engine, since a
// live audit team holds the physical groups.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rla/auditor.hpp"

namespace rla {

struct GroupCvrRow {
    std::int64_t s = 0;
    std::int64_t w = 0;
    std::int64_t l = 0;
    friend bool operator==(const GroupCvrRow&, const GroupCvrRow&) = default;
};

struct GroupCvrTable {
    int batch_index = 0;
    std::vector<GroupCvrRow> groups;

    /// max(w, l) <= s for every group, all entries nonnegative.
    bool well_formed() const noexcept;
    std::int64_t size() const noexcept;
    std::int64_t winner_votes() const noexcept;
    std::int64_t loser_votes() const noexcept;
    friend bool operator==(const GroupCvrTable&, const GroupCvrTable&) = default;
};

ConsistencyResult check_group_consistent(const Manifest& manifest, const Tabulation& normalized,
                                         const GroupCvrTable& cvr);

/// Hand count of whatever ballots were produced for a group.
struct GroupCount {
    std::int64_t size = 0;
    std::int64_t w = 0;
    std::int64_t l = 0;
};

/// Discrepancy for a hand-counted group; 2 on any size mismatch.
double group_discrepancy(const GroupCvrRow& declared, const GroupCount& counted);

struct GroupRequest {
    int batch = 0;
    std::int64_t group = 0;  ///< 1-based
    std::int64_t declared_size = 0;
};

struct GroupStepResult {
    std::optional<IterationRecord> completed;
    std::optional<GroupRequest> request;
};

struct GroupDrawResult {
    int batch = 0;
    bool needs_cvr = true;
    GroupStepResult step;
};

/// Records use `row` for the drawn ballot position and `identifier` for the
/// 1-based group index (nullopt when the check failed); ballot_w/ballot_l hold
/// the group's hand-counted totals.
class GroupAuditEngine {
public:
    GroupAuditEngine(Manifest manifest, const Tabulation& tabulation, AuditConfig config);

    AuditStatus status() const noexcept { return status_; }
    const Normalization& normalization() const noexcept { return norm_; }
    const AuditConfig& config() const noexcept { return config_; }
    const Manifest& manifest() const noexcept { return manifest_; }
    const TestState& test() const noexcept { return test_; }
    const AuditTranscript& transcript() const noexcept { return transcript_; }
    std::optional<Verdict> verdict() const;
    int current_batch() const noexcept { return batch_; }
    std::optional<GroupRequest> pending_request() const;

    GroupDrawResult draw_batch();
    GroupStepResult submit_cvr(const GroupCvrTable& cvr);
    IterationRecord submit_count(const GroupCount& counted);

    /// As BallotAuditEngine::restore.
    void restore(const std::vector<IterationRecord>& completed,
                 const std::function<std::optional<GroupCvrTable>(int batch)>& round_cvr = {});

private:
    struct ReceivedCvr {
        std::optional<GroupCvrTable> table;
        std::string digest;
    };

    ReceivedCvr receive(const GroupCvrTable& cvr) const;

    GroupStepResult select_group(const ReceivedCvr& received);
    IterationRecord finish(std::int64_t row, std::optional<Identifier> identifier, std::int64_t w, std::int64_t l,
                           bool missing, double discrepancy);

    Manifest manifest_;
    AuditConfig config_;
    Normalization norm_;
    KmConfig km_;
    CounterRng rng_;
    TestState test_;
    AuditTranscript transcript_;
    AuditStatus status_ = AuditStatus::AwaitingBatch;

    std::int64_t iter_ = 0;
    int batch_ = 0;
    std::map<int, ReceivedCvr> round_cache_;
    std::optional<GroupCvrRow> pending_group_;
    std::int64_t pending_index_ = 0;
    std::int64_t pending_row_ = 0;
    std::string pending_digest_;
};

/// Positions (0-based, within the batch) of each group's ballots.
using GroupPartition = std::vector<std::vector<std::size_t>>;

struct GroupCvrResponse {
    GroupCvrTable table;
    GroupPartition partition;  ///< only read on the first request for the batch
};

class GroupAdversary {
public:
    virtual ~GroupAdversary() = default;
    virtual GroupCvrResponse request_group_cvr(int batch) = 0;
    virtual std::vector<BallotRef> request_group(int batch, std::int64_t group) = 0;
    virtual void observe(const IterationRecord&) {}
};

/// Holds the partitions committed by the adversary. A partition that does not
/// cover every position of the batch exactly once forfeits the batch: every
/// later comparison there scores 2.
class GroupReferee {
public:
    explicit GroupReferee(const BallotFamily& physical) : physical_(physical) {}

    void commit(int batch, const GroupPartition& partition);
    bool committed(int batch) const { return partitions_.count(batch) > 0; }
    /// Hand count of the returned ballots that lie in the committed group.
    GroupCount count(int batch, std::int64_t group, const std::vector<BallotRef>& returned) const;

private:
    const BallotFamily& physical_;
    std::map<int, std::optional<GroupPartition>> partitions_;
};

IterationRecord group_basic_experiment(GroupAdversary& adversary, GroupReferee& referee, GroupAuditEngine& engine);

AuditOutcome run_group_audit(GroupAdversary& adversary, const Election& election, const AuditConfig& config);

std::string group_cvr_digest(const GroupCvrTable& table);

}  // namespace rla
