#include "rla/auditor.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <unordered_set>
#include <utility>

#include "rla/digest.hpp"
#include "rla/errors.hpp"

namespace rla {

std::string_view to_string(AuditMode mode) noexcept {
    switch (mode) {
        case AuditMode::Ballot: return "ballot";
        case AuditMode::BallotNoOvervote: return "ballot_no_overvote";
        case AuditMode::Group: return "group";
    }
    return "ballot";
}

std::string_view to_string(Verdict verdict) noexcept {
    return verdict == Verdict::Consistent ? "Consistent" : "Inconclusive";
}

std::string_view to_string(AuditStatus status) noexcept {
    switch (status) {
        case AuditStatus::AwaitingBatch: return "AwaitingBatch";
        case AuditStatus::AwaitingCvr: return "AwaitingCvr";
        case AuditStatus::AwaitingBallot: return "AwaitingBallot";
        case AuditStatus::Stopped: return "Stopped";
    }
    return "Stopped";
}

AuditMode audit_mode_from_string(std::string_view name) {
    if (name == "ballot") return AuditMode::Ballot;
    if (name == "ballot_no_overvote") return AuditMode::BallotNoOvervote;
    if (name == "group") return AuditMode::Group;
    throw ConfigError("unknown audit mode: " + std::string(name));
}

AuditStatus audit_status_from_string(std::string_view name) {
    for (auto s : {AuditStatus::AwaitingBatch, AuditStatus::AwaitingCvr, AuditStatus::AwaitingBallot,
                   AuditStatus::Stopped}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown audit status: " + std::string(name));
}

void AuditConfig::validate() const {
    km(1.0).validate();
    if (rounds && *rounds < 1) throw ConfigError("rounds must be at least 1");
    if (mode == AuditMode::BallotNoOvervote && transform == TransformKind::Force) {
        // Force may emit (1,1) rows, which the overvote-free check always rejects.
        throw ConfigError("ballot_no_overvote mode needs the identity or force_no_overvote transform");
    }
    if (mode != AuditMode::BallotNoOvervote && transform == TransformKind::ForceNoOvervote) {
        throw ConfigError("force_no_overvote transform needs ballot_no_overvote mode");
    }
}

KmConfig AuditConfig::km(double delta) const { return KmConfig{alpha, gamma, ell_min, ell_max, delta}; }

Normalization normalize_tabulation(const Manifest& manifest, const Tabulation& tabulation, AuditMode mode) {
    if (manifest.size() != tabulation.size()) {
        throw ConfigError("manifest has " + std::to_string(manifest.size()) + " batches but tabulation has " +
                          std::to_string(tabulation.size()));
    }
    Normalization out;
    out.tabulation.reserve(tabulation.size());
    std::int64_t s = 0;
    std::int64_t margin = 0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const std::int64_t size = manifest[i];
        if (size < 0) throw ConfigError("negative manifest entry");
        BatchTally t = tabulation[i];
        const std::string where = "batch " + std::to_string(i + 1) + ": ";
        if (t.s != size) {
            out.warnings.push_back(where + "tabulated size " + std::to_string(t.s) + " replaced by manifest size " +
                                   std::to_string(size));
        }
        t.s = size;
        const BatchTally before = t;
        t.l = std::min(t.l, size);
        t.w = mode == AuditMode::BallotNoOvervote ? std::min(t.w, size - t.l) : std::min(t.w, size);
        if (t.w != before.w || t.l != before.l) out.warnings.push_back(where + "vote counts clamped to batch size");
        s += size;
        margin += t.w - t.l;
        out.tabulation.push_back(t);
    }
    out.mu = s > 0 ? Rational(margin, s) : Rational(0);
    out.auditable = out.mu > Rational(0);
    return out;
}

ConsistencyResult check_consistent(const Manifest& manifest, const Tabulation& normalized, const CvrTable& cvr,
                                   bool forbid_overvotes) {
    const int beta = cvr.batch_index;
    if (beta < 1 || static_cast<std::size_t>(beta) > manifest.size() || normalized.size() != manifest.size()) {
        return {false, "batch index out of range"};
    }
    const auto i = static_cast<std::size_t>(beta - 1);
    const BatchTally& tab = normalized[i];
    if (!cvr.uniquely_labeled()) return {false, "CVR is not uniquely labeled"};
    if (cvr.size() != manifest[i]) return {false, "CVR size differs from manifest"};
    if (manifest[i] != tab.s) return {false, "manifest size differs from tabulation"};
    for (const auto& r : cvr.rows) {
        if (r.votes_w < 0 || r.votes_w > 1 || r.votes_l < 0 || r.votes_l > 1) return {false, "vote value outside {0,1}"};
        if (forbid_overvotes && r.overvote()) return {false, "CVR contains an overvote row"};
    }
    if (cvr.winner_votes() != tab.w) return {false, "CVR winner total differs from tabulation"};
    if (cvr.loser_votes() != tab.l) return {false, "CVR loser total differs from tabulation"};
    return {};
}

int sample_batch(const CounterRng& rng, const Manifest& manifest, std::int64_t iteration) {
    std::int64_t total = 0;
    for (auto s : manifest) total += s;
    auto pick = static_cast<std::int64_t>(
        rng.below(static_cast<std::uint64_t>(total), CounterRng::batch_slot(static_cast<std::uint64_t>(iteration))));
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        if (pick < manifest[i]) return static_cast<int>(i) + 1;
        pick -= manifest[i];
    }
    throw ConfigError("empty manifest");
}

int comparison_discrepancy(const CvrRow& row, const std::optional<Ballot>& delivered, int batch) {
    const bool usable = delivered && delivered->batch_index == batch && delivered->identifier == row.identifier;
    const int actual = usable ? delivered->net() : -1;
    return row.net() - actual;
}

BallotAuditEngine::BallotAuditEngine(Manifest manifest, const Tabulation& tabulation, AuditConfig config,
                                     ConsistencyCheck check)
    : manifest_(std::move(manifest)), config_(std::move(config)), check_(std::move(check)), rng_(config_.rng_seed) {
    config_.validate();
    if (config_.mode == AuditMode::Group) throw ConfigError("group mode needs the group audit engine");
    norm_ = normalize_tabulation(manifest_, tabulation, config_.mode);
    if (!check_) {
        const bool forbid = config_.mode == AuditMode::BallotNoOvervote;
        check_ = [forbid](const Manifest& m, const Tabulation& t, const CvrTable& c) {
            return check_consistent(m, t, c, forbid);
        };
    }
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

std::optional<Verdict> BallotAuditEngine::verdict() const {
    if (status_ != AuditStatus::Stopped) return std::nullopt;
    return test_.rejected ? Verdict::Consistent : Verdict::Inconclusive;
}

std::optional<BallotRequest> BallotAuditEngine::pending_request() const {
    if (status_ != AuditStatus::AwaitingBallot || !pending_row_) return std::nullopt;
    return BallotRequest{batch_, pending_row_index_, pending_row_->identifier};
}

bool BallotAuditEngine::round_boundary() const noexcept {
    return config_.rounds && (iter_ - 1) % *config_.rounds == 0;
}

DrawResult BallotAuditEngine::draw_batch() {
    if (status_ != AuditStatus::AwaitingBatch) {
        throw StateError("draw is only valid while awaiting a batch (status " + std::string(to_string(status_)) + ")");
    }
    ++iter_;
    if (round_boundary()) round_cache_.clear();

    const int beta = sample_batch(rng_, manifest_, iter_);
    batch_ = beta;

    DrawResult result;
    result.batch = beta;
    if (auto it = round_cache_.find(beta); it != round_cache_.end()) {
        result.needs_cvr = false;
        result.step = select_row(it->second);
    } else {
        status_ = AuditStatus::AwaitingCvr;
    }
    return result;
}

StepResult BallotAuditEngine::submit_cvr(const CvrTable& cvr) {
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
        return select_row(it->second);
    }
    return select_row(received);
}

BallotAuditEngine::ReceivedCvr BallotAuditEngine::receive(const CvrTable& cvr) const {
    // Adversaries often resend the same table; transform and check are pure.
    if (auto it = memo_.find(cvr.batch_index); it != memo_.end() && it->second.first == cvr) return it->second.second;
    ReceivedCvr received;
    auto transformed = apply_transform(config_.transform, manifest_, norm_.tabulation, cvr);
    if (transformed && check_(manifest_, norm_.tabulation, *transformed).ok) {
        if (config_.record_cvr_digests) received.digest = cvr_digest(*transformed);
        received.table = std::move(transformed);
    } else if (config_.record_cvr_digests) {
        received.digest = cvr_digest(transformed ? *transformed : cvr);
    }
    memo_[cvr.batch_index] = {cvr, received};
    return received;
}

StepResult BallotAuditEngine::select_row(const ReceivedCvr& received) {
    const auto size = static_cast<std::uint64_t>(manifest_[static_cast<std::size_t>(batch_ - 1)]);
    const auto r = static_cast<std::int64_t>(rng_.below(size, CounterRng::row_slot(static_cast<std::uint64_t>(iter_))));
    pending_digest_ = received.digest;
    StepResult step;
    if (!received.table || r >= received.table->size()) {
        step.completed = finish(r + 1, std::nullopt, 0, 0, false, 2.0);
        return step;
    }
    const CvrRow& row = received.table->rows[static_cast<std::size_t>(r)];
    if (is_reserved_identifier(row.identifier)) {
        // Auditor-internal labels match no ballot, so there is nothing to ask for.
        step.completed = finish(r + 1, row.identifier, 0, 1, true, comparison_discrepancy(row, std::nullopt, batch_));
        return step;
    }
    pending_row_ = row;
    pending_row_index_ = r + 1;
    status_ = AuditStatus::AwaitingBallot;
    step.request = BallotRequest{batch_, r + 1, row.identifier};
    return step;
}

IterationRecord BallotAuditEngine::submit_ballot(const std::optional<Ballot>& delivered) {
    if (status_ != AuditStatus::AwaitingBallot || !pending_row_) {
        throw StateError("ballot submission is only valid while awaiting a ballot (status " +
                         std::string(to_string(status_)) + ")");
    }
    const CvrRow row = *std::exchange(pending_row_, std::nullopt);
    const bool usable = delivered && delivered->batch_index == batch_ && delivered->identifier == row.identifier;
    const int w = usable ? delivered->votes_w : 0;
    const int l = usable ? delivered->votes_l : 1;
    return finish(pending_row_index_, row.identifier, w, l, !usable, comparison_discrepancy(row, delivered, batch_));
}

IterationRecord BallotAuditEngine::finish(std::int64_t row, std::optional<Identifier> identifier, int bw, int bl,
                                          bool missing, double discrepancy) {
    test_ = test_step(std::move(test_), discrepancy, km_);
    IterationRecord rec;
    rec.iter = iter_;
    rec.batch = batch_;
    rec.cvr_digest = std::move(pending_digest_);
    pending_digest_.clear();
    rec.row = row;
    rec.identifier = std::move(identifier);
    rec.ballot_w = bw;
    rec.ballot_l = bl;
    rec.missing = missing;
    rec.discrepancy = discrepancy;
    rec.log_risk = test_.log_risk;
    transcript_.iterations.push_back(rec);
    status_ = test_.stopped ? AuditStatus::Stopped : AuditStatus::AwaitingBatch;
    return rec;
}

void verify_recorded_draw(const CounterRng& rng, const Manifest& manifest, std::int64_t iteration,
                          const IterationRecord& record) {
    const std::string where = "iteration " + std::to_string(iteration) + ": ";
    if (record.iter != iteration) throw IntegrityError(where + "recorded as iteration " + std::to_string(record.iter));
    const int batch = sample_batch(rng, manifest, iteration);
    if (record.batch != batch) {
        throw IntegrityError(where + "batch " + std::to_string(record.batch) + " recorded but the seed draws batch " +
                             std::to_string(batch));
    }
    const auto size = static_cast<std::uint64_t>(manifest[static_cast<std::size_t>(batch - 1)]);
    const auto row = static_cast<std::int64_t>(rng.below(size, CounterRng::row_slot(static_cast<std::uint64_t>(iteration)))) + 1;
    if (record.row != row) {
        throw IntegrityError(where + "row " + std::to_string(record.row) + " recorded but the seed draws row " +
                             std::to_string(row));
    }
    if (!(record.discrepancy >= -2.0 && record.discrepancy <= 2.0)) {
        throw IntegrityError(where + "discrepancy outside [-2,2]");
    }
}

bool in_open_round(const std::optional<std::int64_t>& rounds, std::int64_t iter, std::int64_t completed) noexcept {
    return rounds && (iter - 1) / *rounds == completed / *rounds;
}

void BallotAuditEngine::restore(const std::vector<IterationRecord>& completed,
                                const std::function<std::optional<CvrTable>(int batch)>& round_cvr) {
    if (iter_ != 0) throw StateError("restore needs a fresh engine");
    const auto n = static_cast<std::int64_t>(completed.size());
    for (const auto& rec : completed) {
        if (status_ != AuditStatus::AwaitingBatch) {
            throw IntegrityError("iteration " + std::to_string(rec.iter) + " recorded after the audit stopped");
        }
        ++iter_;
        if (round_boundary()) round_cache_.clear();
        verify_recorded_draw(rng_, manifest_, iter_, rec);
        batch_ = rec.batch;
        if (in_open_round(config_.rounds, iter_, n) && !round_cache_.count(batch_)) {
            std::optional<CvrTable> cvr = round_cvr ? round_cvr(batch_) : std::nullopt;
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

IterationRecord basic_experiment(Adversary& adversary, const BallotFamily& physical, BallotAuditEngine& engine) {
    DrawResult draw = engine.draw_batch();
    StepResult step = std::move(draw.step);
    if (draw.needs_cvr) {
        CvrTable table = adversary.request_cvr(draw.batch);
        table.batch_index = draw.batch;
        step = engine.submit_cvr(table);
    }
    IterationRecord rec;
    if (step.completed) {
        rec = std::move(*step.completed);
    } else {
        const BallotRequest& req = *step.request;
        std::optional<Ballot> ballot;
        if (auto ref = adversary.request_ballot(req.identifier, req.batch); ref && ref->batch == req.batch) {
            ballot = physical.find(*ref);
        }
        rec = engine.submit_ballot(ballot);
    }
    adversary.observe(rec);
    return rec;
}

AuditOutcome run_audit(Adversary& adversary, const Election& election, const AuditConfig& config,
                       const ConsistencyCheck& check) {
    BallotAuditEngine engine(election.manifest(), election.tabulation, config, check);
    while (engine.status() != AuditStatus::Stopped) basic_experiment(adversary, election.family, engine);
    return {*engine.verdict(), engine.transcript()};
}

std::string transcript_digest(const AuditTranscript& transcript) {
    std::string buf;
    char line[256];
    std::snprintf(line, sizeof line, "seed=%" PRIu64 ";mu=%s;", transcript.seed, transcript.mu.str().c_str());
    buf += line;
    for (const auto& t : transcript.normalized) {
        std::snprintf(line, sizeof line, "(%" PRId64 ",%" PRId64 ",%" PRId64 ")", t.s, t.w, t.l);
        buf += line;
    }
    for (const auto& r : transcript.iterations) {
        std::snprintf(line, sizeof line, "\n%" PRId64 ",%d,%" PRId64 ",%d,%d,%d,%.17g,%.17g,", r.iter, r.batch, r.row,
                      r.ballot_w, r.ballot_l, r.missing ? 1 : 0, r.discrepancy, r.log_risk);
        buf += line;
        buf += r.cvr_digest;
        buf += ',';
        if (r.identifier) {
            buf += std::to_string(r.identifier->size());
            buf += ':';
            buf += *r.identifier;
        } else {
            buf += '-';
        }
    }
    return sha256_hex(buf);
}

}  // namespace rla
