#pragma once

// The adaptive ballot-comparison auditor.
//
// BallotAuditEngine is the auditor's side of the game as an explicit state
// machine (AwaitingBatch -> AwaitingCvr -> AwaitingBallot -> ...). The
// simulation loop (run_audit), the interactive CLI and the HTTP service all
// drive the same engine, which is what makes their transcripts comparable.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rla/election.hpp"
#include "rla/km_test.hpp"
#include "rla/rational.hpp"
#include "rla/rng.hpp"
#include "rla/transforms.hpp"

namespace rla {

enum class AuditMode { Ballot, BallotNoOvervote, Group };
enum class Verdict { Consistent, Inconclusive };
enum class AuditStatus { AwaitingBatch, AwaitingCvr, AwaitingBallot, Stopped };

std::string_view to_string(AuditMode mode) noexcept;
std::string_view to_string(Verdict verdict) noexcept;
std::string_view to_string(AuditStatus status) noexcept;
AuditMode audit_mode_from_string(std::string_view name);
AuditStatus audit_status_from_string(std::string_view name);

struct AuditConfig {
    double alpha = 0.05;
    double gamma = 1.1;
    std::int64_t ell_min = 1;
    std::int64_t ell_max = 10000;
    TransformKind transform = TransformKind::Force;
    AuditMode mode = AuditMode::Ballot;
    std::optional<std::int64_t> rounds;  ///< batches drawn per round; unset = sequential
    std::uint64_t rng_seed = 0;
    bool record_cvr_digests = true;  ///< off only for bulk simulation

    void validate() const;
    KmConfig km(double delta) const;

    friend bool operator==(const AuditConfig&, const AuditConfig&) = default;
};

/// One iteration of the audit loop. `identifier` is empty (nullopt) when the
/// consistency check failed; `row` is the 1-based row drawn in every case.
struct IterationRecord {
    std::int64_t iter = 0;
    int batch = 0;
    std::string cvr_digest;
    std::int64_t row = 0;
    std::optional<Identifier> identifier;
    int ballot_w = 0;
    int ballot_l = 0;
    bool missing = false;
    double discrepancy = 0.0;
    double log_risk = 0.0;

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct AuditTranscript {
    std::uint64_t seed = 0;
    Tabulation normalized;
    Rational mu;
    std::vector<IterationRecord> iterations;

    friend bool operator==(const AuditTranscript&, const AuditTranscript&) = default;
};

struct AuditOutcome {
    Verdict verdict = Verdict::Inconclusive;
    AuditTranscript transcript;
};

struct Normalization {
    Tabulation tabulation;
    Rational mu;
    bool auditable = false;  ///< mu > 0
    std::vector<std::string> warnings;
};

/// Clamp the tabulation to the manifest and compute the margin handed to the test.
Normalization normalize_tabulation(const Manifest& manifest, const Tabulation& tabulation, AuditMode mode);

struct ConsistencyResult {
    bool ok = true;
    std::string reason;
};

ConsistencyResult check_consistent(const Manifest& manifest, const Tabulation& normalized, const CvrTable& cvr,
                                   bool forbid_overvotes = false);

using ConsistencyCheck = std::function<ConsistencyResult(const Manifest&, const Tabulation&, const CvrTable&)>;

/// Batch drawn in iteration i, with probability proportional to its manifest size.
int sample_batch(const CounterRng& rng, const Manifest& manifest, std::int64_t iteration);

/// Discrepancy of one comparison; a missing or mismatched ballot reads as (0,1).
int comparison_discrepancy(const CvrRow& row, const std::optional<Ballot>& delivered, int batch);

struct BallotRequest {
    int batch = 0;
    std::int64_t row = 0;
    Identifier identifier;
};

/// Either the iteration finished (consistency error, or a reserved identifier
/// that cannot match a ballot) or a ballot must be fetched.
struct StepResult {
    std::optional<IterationRecord> completed;
    std::optional<BallotRequest> request;
};

struct DrawResult {
    int batch = 0;
    bool needs_cvr = true;
    StepResult step;  ///< populated when the batch's CVR was already received this round
};

class BallotAuditEngine {
public:
    BallotAuditEngine(Manifest manifest, const Tabulation& tabulation, AuditConfig config,
                      ConsistencyCheck check = {});

    AuditStatus status() const noexcept { return status_; }
    const Normalization& normalization() const noexcept { return norm_; }
    const AuditConfig& config() const noexcept { return config_; }
    const Manifest& manifest() const noexcept { return manifest_; }
    const TestState& test() const noexcept { return test_; }
    const AuditTranscript& transcript() const noexcept { return transcript_; }
    std::optional<Verdict> verdict() const;

    std::int64_t next_iteration() const noexcept { return iter_ + (status_ == AuditStatus::AwaitingBatch ? 1 : 0); }
    int current_batch() const noexcept { return batch_; }
    std::optional<BallotRequest> pending_request() const;

    DrawResult draw_batch();
    StepResult submit_cvr(const CvrTable& cvr);
    IterationRecord submit_ballot(const std::optional<Ballot>& delivered);

    /// Re-enters completed iterations on a fresh engine, re-deriving every draw
    /// and every log_risk; the current round's cached CVRs come from
    /// `round_cvr`. Throws IntegrityError on any mismatch.
    void restore(const std::vector<IterationRecord>& completed,
                 const std::function<std::optional<CvrTable>(int batch)>& round_cvr = {});

private:
    struct ReceivedCvr {
        std::optional<CvrTable> table;  ///< nullopt when the check failed
        std::string digest;
    };

    ReceivedCvr receive(const CvrTable& cvr) const;

    StepResult select_row(const ReceivedCvr& received);
    IterationRecord finish(std::int64_t row, std::optional<Identifier> identifier, int bw, int bl, bool missing,
                           double discrepancy);
    bool round_boundary() const noexcept;

    Manifest manifest_;
    AuditConfig config_;
    ConsistencyCheck check_;
    Normalization norm_;
    KmConfig km_;
    CounterRng rng_;
    TestState test_;
    AuditTranscript transcript_;
    AuditStatus status_ = AuditStatus::AwaitingBatch;

    std::int64_t iter_ = 0;
    int batch_ = 0;
    std::map<int, ReceivedCvr> round_cache_;
    mutable std::map<int, std::pair<CvrTable, ReceivedCvr>> memo_;  ///< last table received per batch
    std::optional<CvrRow> pending_row_;
    std::int64_t pending_row_index_ = 0;
    std::string pending_digest_;
};

/// The adversary's side of the ballot-comparison game.
class Adversary {
public:
    virtual ~Adversary() = default;
    virtual CvrTable request_cvr(int batch) = 0;
    /// A physical ballot from the batch, or nullopt for "no ballot".
    virtual std::optional<BallotRef> request_ballot(const Identifier& identifier, int batch) = 0;
    /// Audits are public; adversaries may adapt to every finished iteration.
    virtual void observe(const IterationRecord&) {}
};

/// One iteration: draw, request CVR (if needed this round), compare one ballot.
/// Ballot references are resolved against the physical family; anything outside
/// the requested batch is read as "no ballot".
IterationRecord basic_experiment(Adversary& adversary, const BallotFamily& physical, BallotAuditEngine& engine);

AuditOutcome run_audit(Adversary& adversary, const Election& election, const AuditConfig& config,
                       const ConsistencyCheck& check = {});

/// Checks that a recorded iteration's batch and row are the ones the seed
/// yields; throws IntegrityError otherwise.
void verify_recorded_draw(const CounterRng& rng, const Manifest& manifest, std::int64_t iteration,
                          const IterationRecord& record);

/// Whether iteration `iter` falls in the same round as the next iteration
/// after `completed` iterations.
bool in_open_round(const std::optional<std::int64_t>& rounds, std::int64_t iter, std::int64_t completed) noexcept;

/// Digest over the whole transcript (seed, normalized tabulation, every record).
std::string transcript_digest(const AuditTranscript& transcript);

}  // namespace rla
