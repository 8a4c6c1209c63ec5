#pragma once

// Live audit sessions and their persistence.
//
// A session directory holds
//   session.json       config, manifest, tabulation, seed, status, version
//   transcript.jsonl   one completed iteration per line, each carrying a
//                      rolling SHA-256 over all previous lines
//   cvrs/<batch>.csv   the latest CVR uploaded for each batch
//
// Loading re-derives every draw and log_risk from the seed and the recorded
// discrepancies, so a tampered transcript fails with IntegrityError even when
// its digests were recomputed.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rla/auditor.hpp"
#include "rla/group_auditor.hpp"

namespace rla {

using Json = nlohmann::json;

// ----------------------------------------------------------------- storage

/// Key-value storage; keys are '/'-separated relative paths.
class KvStore {
public:
    virtual ~KvStore() = default;
    virtual std::optional<std::string> get(const std::string& key) const = 0;
    /// Replaces the value atomically.
    virtual void put(const std::string& key, std::string_view value) = 0;
    virtual void append(const std::string& key, std::string_view value) = 0;
    /// Top-level names (first path component) currently stored.
    virtual std::vector<std::string> scopes() const = 0;

    /// Exclusive write access to one scope (a session id) until the guard dies.
    class Guard {
    public:
        virtual ~Guard() = default;
    };
    virtual std::unique_ptr<Guard> lock(const std::string& scope) = 0;
};

class MemoryStore : public KvStore {
public:
    std::optional<std::string> get(const std::string& key) const override;
    void put(const std::string& key, std::string_view value) override;
    void append(const std::string& key, std::string_view value) override;
    std::vector<std::string> scopes() const override;
    std::unique_ptr<Guard> lock(const std::string& scope) override;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> data_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// One file per key under `root`. Writes go through a temporary file and a
/// rename; scope locks also take an flock so separate processes exclude each other.
class DirectoryStore : public KvStore {
public:
    explicit DirectoryStore(std::string root);

    std::optional<std::string> get(const std::string& key) const override;
    void put(const std::string& key, std::string_view value) override;
    void append(const std::string& key, std::string_view value) override;
    std::vector<std::string> scopes() const override;
    std::unique_ptr<Guard> lock(const std::string& scope) override;

    const std::string& root() const noexcept { return root_; }

private:
    std::string path(const std::string& key) const;

    std::string root_;
    std::mutex mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// ------------------------------------------------------------ serialization

Json config_to_json(const AuditConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
AuditConfig config_from_json(const Json& j);

Json record_to_json(const IterationRecord& record);
IterationRecord record_from_json(const Json& j);

// ------------------------------------------------------------------ session

struct SessionRecord {
    std::string id;
    AuditConfig config;  ///< config.rng_seed is the committed seed
    Manifest manifest;
    Tabulation tabulation;  ///< as submitted
    Tabulation normalized;
    Rational mu;
    std::vector<IterationRecord> iterations;
    AuditStatus status = AuditStatus::AwaitingBatch;
    int current_batch = 0;  ///< while awaiting a CVR or ballot
    std::int64_t version = 0;  ///< bumped by every save

    friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

/// Rolling digest of transcript line `index` (0-based) given the previous one.
std::string transcript_line_digest(const std::string& previous, const IterationRecord& record);
std::string transcript_genesis(const std::string& id, std::uint64_t seed);

/// Hand interpretation of one ballot: (w, l), or nullopt for "missing".
using Interpretation = std::optional<std::pair<int, int>>;

/// Request the audit team must satisfy next.
struct PendingRequest {
    int batch = 0;
    std::int64_t row = 0;           ///< ballot mode: 1-based CVR row
    Identifier identifier;          ///< ballot mode
    std::int64_t group = 0;         ///< group mode
    std::int64_t declared_size = 0; ///< group mode
};

class AuditSession {
public:
    /// Fresh session; the tabulation is normalized against the manifest.
    AuditSession(std::string id, Manifest manifest, Tabulation tabulation, AuditConfig config);

    /// Rebuilds a session from its record and the stored CVR files, replaying
    /// the transcript. Throws IntegrityError when anything fails to replay.
    static AuditSession restore(SessionRecord record, std::map<int, std::string> cvr_files);

    const SessionRecord& record() const noexcept { return record_; }
    const std::map<int, std::string>& cvr_files() const noexcept { return cvr_files_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    AuditStatus status() const noexcept { return record_.status; }
    std::optional<Verdict> verdict() const;
    std::optional<PendingRequest> pending() const;
    double log_risk() const;

    /// Returns the drawn batch. In round mode a batch whose CVR is already in
    /// hand moves straight to its ballot request (or completes).
    int draw();
    /// CSV bytes in the CVR format (group CVR format in group mode).
    void submit_cvr_csv(std::string_view csv);
    IterationRecord submit_interpretation(const Interpretation& interpretation);
    IterationRecord submit_group_count(const GroupCount& count);

    /// save_session on this session's record and CVR files.
    void save(KvStore& store);

private:
    void sync();

    SessionRecord record_;
    std::map<int, std::string> cvr_files_;
    std::vector<std::string> warnings_;
    std::unique_ptr<BallotAuditEngine> ballot_;
    std::unique_ptr<GroupAuditEngine> group_;
};

/// Writes new transcript lines, changed CVR files and session.json, then bumps
/// record.version. Throws ConflictError if the stored version differs from
/// record.version (another writer saved first).
void save_session(KvStore& store, SessionRecord& record, const std::map<int, std::string>& cvr_files);

struct StoredSession {
    SessionRecord record;
    std::map<int, std::string> cvr_files;
};

/// Contents of session.json; `record.iterations` is left empty.
struct SessionHeader {
    SessionRecord record;
    std::size_t iterations = 0;
    std::string transcript_head;
    /// SHA-256 of the CVR behind a pending ballot request; empty otherwise.
    std::string pending_cvr_sha256;
};

/// Throws IntegrityError on malformed or unsupported headers.
SessionHeader parse_session_header(std::string_view session_json);

/// Reads and verifies digests; throws IntegrityError on corruption and
/// ConfigError if the session does not exist.
StoredSession load_session(const KvStore& store, const std::string& id);

/// Loads and rebuilds a live session (full replay).
AuditSession open_session(const KvStore& store, const std::string& id);

/// Recomputes the log_risk column of a transcript from its discrepancies and
/// reports the first line (1-based) whose value or digest does not match.
struct ReplayReport {
    bool ok = true;
    std::int64_t lines = 0;
    std::int64_t first_bad_line = 0;
    std::string message;
};

ReplayReport replay_transcript(const SessionRecord& header, std::string_view transcript_jsonl);

}  // namespace rla
