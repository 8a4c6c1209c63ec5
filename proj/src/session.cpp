#include "rla/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rla/csv_io.hpp"
#include "rla/digest.hpp"
#include "rla/errors.hpp"

namespace rla {
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

class MutexGuard : public KvStore::Guard {
public:
    explicit MutexGuard(std::mutex& m) : lock_(m) {}

private:
    std::unique_lock<std::mutex> lock_;
};

class FileGuard : public KvStore::Guard {
public:
    FileGuard(std::mutex& m, const std::string& path) : lock_(m) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error("cannot open lock file " + path);
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error("cannot lock " + path);
        }
    }
    ~FileGuard() override {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileGuard(const FileGuard&) = delete;
    FileGuard& operator=(const FileGuard&) = delete;

private:
    std::unique_lock<std::mutex> lock_;
    int fd_ = -1;
};

std::string scope_of(const std::string& key) { return key.substr(0, key.find('/')); }

std::string tally_text(const Rational& r) { return r.str(); }

Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return Rational(std::stoll(text));
        return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
    } catch (const std::logic_error&) {
        throw IntegrityError("malformed rational '" + text + "'");
    }
}

Json tabulation_json(const Tabulation& t) {
    Json out = Json::array();
    for (const auto& b : t) out.push_back({b.s, b.w, b.l});
    return out;
}

Tabulation tabulation_from(const Json& j) {
    Tabulation out;
    for (const auto& b : j) out.push_back({b.at(0).get<std::int64_t>(), b.at(1).get<std::int64_t>(), b.at(2).get<std::int64_t>()});
    return out;
}

Json header_json(const SessionRecord& r, const std::string& head, const std::map<int, std::string>& cvr_files) {
    Json h{{"format_version", kFormatVersion},
                {"id", r.id},
                {"version", r.version},
                {"config", config_to_json(r.config)},
                {"manifest", r.manifest},
                {"tabulation", tabulation_json(r.tabulation)},
                {"normalized", tabulation_json(r.normalized)},
                {"mu", tally_text(r.mu)},
                {"status", std::string(to_string(r.status))},
                {"current_batch", r.current_batch},
                {"iterations", r.iterations.size()},
                {"transcript_head", head}};
    // The CVR a pending ballot request was drawn from is pinned by digest.
    if (r.status == AuditStatus::AwaitingBallot) {
        if (auto it = cvr_files.find(r.current_batch); it != cvr_files.end()) {
            h["pending_cvr_sha256"] = sha256_hex(it->second);
        }
    }
    return h;
}

std::string key(const std::string& id, const std::string& name) { return id + "/" + name; }

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        out.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

}  // namespace

// ------------------------------------------------------------------ stores

std::optional<std::string> MemoryStore::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = data_.find(key);
    if (it == data_.end()) return std::nullopt;
    return it->second;
}

void MemoryStore::put(const std::string& key, std::string_view value) {
    std::lock_guard lock(mu_);
    data_[key] = std::string(value);
}

void MemoryStore::append(const std::string& key, std::string_view value) {
    std::lock_guard lock(mu_);
    data_[key] += value;
}

std::vector<std::string> MemoryStore::scopes() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : data_) {
        auto s = scope_of(k);
        if (out.empty() || out.back() != s) out.push_back(s);
    }
    return out;
}

std::unique_ptr<KvStore::Guard> MemoryStore::lock(const std::string& scope) {
    std::mutex* m;
    {
        std::lock_guard lock(mu_);
        auto& slot = locks_[scope];
        if (!slot) slot = std::make_unique<std::mutex>();
        m = slot.get();
    }
    return std::make_unique<MutexGuard>(*m);
}

DirectoryStore::DirectoryStore(std::string root) : root_(std::move(root)) { fs::create_directories(root_); }

std::string DirectoryStore::path(const std::string& key) const {
    for (const auto& part : fs::path(key)) {
        if (part == ".." || part == "." || key.empty() || key.front() == '/') {
            throw ConfigError("invalid storage key '" + key + "'");
        }
    }
    return (fs::path(root_) / key).string();
}

std::optional<std::string> DirectoryStore::get(const std::string& key) const {
    std::ifstream in(path(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void DirectoryStore::put(const std::string& key, std::string_view value) {
    static std::atomic<std::uint64_t> counter{0};
    const fs::path target = path(key);
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(value.data(), static_cast<std::streamsize>(value.size()));
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
}

void DirectoryStore::append(const std::string& key, std::string_view value) {
    const fs::path target = path(key);
    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::app);
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
    if (!out) throw Error("cannot append to " + target.string());
}

std::vector<std::string> DirectoryStore::scopes() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory()) out.push_back(entry.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::unique_ptr<KvStore::Guard> DirectoryStore::lock(const std::string& scope) {
    std::mutex* m;
    {
        std::lock_guard lock(mu_);
        auto& slot = locks_[scope];
        if (!slot) slot = std::make_unique<std::mutex>();
        m = slot.get();
    }
    const fs::path dir = path(scope);
    fs::create_directories(dir);
    return std::make_unique<FileGuard>(*m, (dir / ".lock").string());
}

// ----------------------------------------------------------- serialization

Json config_to_json(const AuditConfig& c) {
    Json j{{"alpha", c.alpha},
           {"gamma", c.gamma},
           {"ell_min", c.ell_min},
           {"ell_max", c.ell_max},
           {"transform", std::string(to_string(c.transform))},
           {"mode", std::string(to_string(c.mode))},
           {"seed", c.rng_seed},
           {"rounds", nullptr}};
    if (c.rounds) j["rounds"] = *c.rounds;
    return j;
}

AuditConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    AuditConfig c;
    try {
        for (const auto& [k, v] : j.items()) {
            if (k == "alpha") c.alpha = v.get<double>();
            else if (k == "gamma") c.gamma = v.get<double>();
            else if (k == "ell_min") c.ell_min = v.get<std::int64_t>();
            else if (k == "ell_max") c.ell_max = v.get<std::int64_t>();
            else if (k == "transform") c.transform = transform_from_string(v.get<std::string>());
            else if (k == "mode") c.mode = audit_mode_from_string(v.get<std::string>());
            else if (k == "seed") c.rng_seed = v.is_string() ? std::stoull(v.get<std::string>()) : v.get<std::uint64_t>();
            else if (k == "rounds") {
                if (!v.is_null()) c.rounds = v.get<std::int64_t>();
            } else {
                throw ConfigError("unknown config field '" + k + "'");
            }
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    } catch (const std::logic_error& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    if (c.mode == AuditMode::BallotNoOvervote && !j.contains("transform")) c.transform = TransformKind::ForceNoOvervote;
    if (c.mode == AuditMode::Group && !j.contains("transform")) c.transform = TransformKind::Identity;
    c.validate();
    return c;
}

Json record_to_json(const IterationRecord& r) {
    return Json{{"iter", r.iter},
                {"batch", r.batch},
                {"cvr_digest", r.cvr_digest},
                {"row", r.row},
                {"identifier", r.identifier ? Json(*r.identifier) : Json(nullptr)},
                {"ballot_w", r.ballot_w},
                {"ballot_l", r.ballot_l},
                {"missing", r.missing},
                {"discrepancy", r.discrepancy},
                {"log_risk", r.log_risk}};
}

IterationRecord record_from_json(const Json& j) {
    IterationRecord r;
    r.iter = j.at("iter").get<std::int64_t>();
    r.batch = j.at("batch").get<int>();
    r.cvr_digest = j.at("cvr_digest").get<std::string>();
    r.row = j.at("row").get<std::int64_t>();
    if (!j.at("identifier").is_null()) r.identifier = j.at("identifier").get<std::string>();
    r.ballot_w = j.at("ballot_w").get<int>();
    r.ballot_l = j.at("ballot_l").get<int>();
    r.missing = j.at("missing").get<bool>();
    r.discrepancy = j.at("discrepancy").get<double>();
    r.log_risk = j.at("log_risk").get<double>();
    return r;
}

std::string transcript_genesis(const std::string& id, std::uint64_t seed) {
    return sha256_hex("transcript:" + id + ":" + std::to_string(seed));
}

std::string transcript_line_digest(const std::string& previous, const IterationRecord& record) {
    return sha256_hex(previous + "\n" + record_to_json(record).dump());
}

// ----------------------------------------------------------------- session

AuditSession::AuditSession(std::string id, Manifest manifest, Tabulation tabulation, AuditConfig config) {
    config.validate();
    record_.id = std::move(id);
    record_.config = config;
    record_.manifest = manifest;
    record_.tabulation = tabulation;
    if (config.mode == AuditMode::Group) {
        group_ = std::make_unique<GroupAuditEngine>(std::move(manifest), tabulation, config);
        warnings_ = group_->normalization().warnings;
        record_.normalized = group_->normalization().tabulation;
        record_.mu = group_->normalization().mu;
    } else {
        ballot_ = std::make_unique<BallotAuditEngine>(std::move(manifest), tabulation, config);
        warnings_ = ballot_->normalization().warnings;
        record_.normalized = ballot_->normalization().tabulation;
        record_.mu = ballot_->normalization().mu;
    }
    sync();
}

void AuditSession::sync() {
    const AuditStatus status = ballot_ ? ballot_->status() : group_->status();
    const auto& done = ballot_ ? ballot_->transcript().iterations : group_->transcript().iterations;
    for (std::size_t i = record_.iterations.size(); i < done.size(); ++i) record_.iterations.push_back(done[i]);
    record_.status = status;
    const bool mid = status == AuditStatus::AwaitingCvr || status == AuditStatus::AwaitingBallot;
    record_.current_batch = mid ? (ballot_ ? ballot_->current_batch() : group_->current_batch()) : 0;
}

std::optional<Verdict> AuditSession::verdict() const { return ballot_ ? ballot_->verdict() : group_->verdict(); }

double AuditSession::log_risk() const { return ballot_ ? ballot_->test().log_risk : group_->test().log_risk; }

std::optional<PendingRequest> AuditSession::pending() const {
    if (ballot_) {
        auto req = ballot_->pending_request();
        if (!req) return std::nullopt;
        return PendingRequest{req->batch, req->row, req->identifier, 0, 0};
    }
    auto req = group_->pending_request();
    if (!req) return std::nullopt;
    return PendingRequest{req->batch, 0, {}, req->group, req->declared_size};
}

int AuditSession::draw() {
    int batch;
    if (ballot_) {
        batch = ballot_->draw_batch().batch;
    } else {
        batch = group_->draw_batch().batch;
    }
    sync();
    return batch;
}

void AuditSession::submit_cvr_csv(std::string_view csv) {
    if (record_.status != AuditStatus::AwaitingCvr) {
        throw StateError("CVR submission is only valid while awaiting a CVR (status " +
                         std::string(to_string(record_.status)) + ")");
    }
    const int batch = record_.current_batch;
    if (ballot_) {
        ballot_->submit_cvr(parse_cvr(csv, batch));
    } else {
        group_->submit_cvr(parse_group_cvr(csv, batch));
    }
    cvr_files_[batch] = std::string(csv);
    sync();
}

IterationRecord AuditSession::submit_interpretation(const Interpretation& interpretation) {
    if (!ballot_) throw StateError("group sessions take group counts, not ballot interpretations");
    auto req = ballot_->pending_request();
    if (!req) {
        throw StateError("interpretation is only valid while awaiting a ballot (status " +
                         std::string(to_string(record_.status)) + ")");
    }
    std::optional<Ballot> ballot;
    if (interpretation) {
        const auto [w, l] = *interpretation;
        if (w < 0 || w > 1 || l < 0 || l > 1) throw ConfigError("interpretation votes must be 0 or 1");
        ballot = Ballot{req->identifier, w, l, req->batch};
    }
    IterationRecord rec = ballot_->submit_ballot(ballot);
    sync();
    return rec;
}

IterationRecord AuditSession::submit_group_count(const GroupCount& count) {
    if (!group_) throw StateError("ballot sessions take ballot interpretations, not group counts");
    IterationRecord rec = group_->submit_count(count);
    sync();
    return rec;
}

AuditSession AuditSession::restore(SessionRecord stored, std::map<int, std::string> cvr_files) {
    AuditSession s(stored.id, stored.manifest, stored.tabulation, stored.config);
    if (s.record_.normalized != stored.normalized || s.record_.mu != stored.mu) {
        throw IntegrityError("stored normalization does not match the manifest and tabulation");
    }
    auto csv_for = [&](int batch) -> const std::string* {
        auto it = cvr_files.find(batch);
        return it == cvr_files.end() ? nullptr : &it->second;
    };
    try {
        if (s.ballot_) {
            s.ballot_->restore(stored.iterations, [&](int batch) -> std::optional<CvrTable> {
                const auto* csv = csv_for(batch);
                if (!csv) return std::nullopt;
                return parse_cvr(*csv, batch);
            });
        } else {
            s.group_->restore(stored.iterations, [&](int batch) -> std::optional<GroupCvrTable> {
                const auto* csv = csv_for(batch);
                if (!csv) return std::nullopt;
                return parse_group_cvr(*csv, batch);
            });
        }
    } catch (const ParseError& e) {
        throw IntegrityError(std::string("stored CVR does not parse: ") + e.what());
    }
    s.cvr_files_ = cvr_files;
    s.sync();
    if (stored.status == AuditStatus::AwaitingCvr || stored.status == AuditStatus::AwaitingBallot) {
        if (s.record_.status != AuditStatus::AwaitingBatch) throw IntegrityError("stored status does not replay");
        const int batch = s.draw();
        if (batch != stored.current_batch) throw IntegrityError("stored current batch does not replay");
        if (stored.status == AuditStatus::AwaitingBallot && s.record_.status == AuditStatus::AwaitingCvr) {
            const auto* csv = csv_for(batch);
            if (!csv) throw IntegrityError("no stored CVR for batch " + std::to_string(batch));
            try {
                s.submit_cvr_csv(*csv);
            } catch (const ParseError& e) {
                throw IntegrityError(std::string("stored CVR does not parse: ") + e.what());
            }
        }
    }
    if (s.record_.status != stored.status || s.record_.current_batch != stored.current_batch ||
        s.record_.iterations.size() != stored.iterations.size()) {
        throw IntegrityError("stored session state does not replay");
    }
    s.record_.version = stored.version;
    return s;
}

// ------------------------------------------------------------- persistence

void save_session(KvStore& store, SessionRecord& record, const std::map<int, std::string>& cvr_files) {
    auto guard = store.lock(record.id);
    std::int64_t stored_version = 0;
    std::size_t stored_lines = 0;
    std::string head = transcript_genesis(record.id, record.config.rng_seed);
    if (auto header = store.get(key(record.id, "session.json"))) {
        const Json h = Json::parse(*header, nullptr, false);
        if (h.is_discarded()) throw IntegrityError("session.json is not valid JSON");
        stored_version = h.value("version", std::int64_t{-1});
        stored_lines = h.value("iterations", std::size_t{0});
        head = h.value("transcript_head", std::string());
    }
    if (stored_version != record.version) {
        throw ConflictError("session " + record.id + " was saved by another writer (stored version " +
                            std::to_string(stored_version) + ", expected " + std::to_string(record.version) + ")");
    }
    if (stored_lines > record.iterations.size()) {
        throw ConflictError("stored transcript is longer than the session being saved");
    }
    // Recompute the digest chain up to the stored head to confirm the stored
    // prefix is the one being extended.
    std::string digest = transcript_genesis(record.id, record.config.rng_seed);
    for (std::size_t i = 0; i < stored_lines; ++i) digest = transcript_line_digest(digest, record.iterations[i]);
    if (digest != head) throw ConflictError("stored transcript diverges from the session being saved");

    std::string lines;
    for (std::size_t i = stored_lines; i < record.iterations.size(); ++i) {
        digest = transcript_line_digest(digest, record.iterations[i]);
        Json j = record_to_json(record.iterations[i]);
        j["digest"] = digest;
        lines += j.dump() + "\n";
    }
    const std::string tkey = key(record.id, "transcript.jsonl");
    const auto existing = store.get(tkey);
    const auto existing_lines = existing ? split_lines(*existing).size() : 0;
    if (existing_lines != stored_lines) {
        // Lines left by an interrupted save were never committed; rewrite the prefix.
        std::string prefix;
        std::string d = transcript_genesis(record.id, record.config.rng_seed);
        for (std::size_t i = 0; i < stored_lines; ++i) {
            d = transcript_line_digest(d, record.iterations[i]);
            Json j = record_to_json(record.iterations[i]);
            j["digest"] = d;
            prefix += j.dump() + "\n";
        }
        store.put(tkey, prefix + lines);
    } else if (!lines.empty() || !existing) {
        store.append(tkey, lines);
    }
    for (const auto& [batch, csv] : cvr_files) {
        const std::string ckey = key(record.id, "cvrs/" + std::to_string(batch) + ".csv");
        auto current = store.get(ckey);
        if (!current || *current != csv) store.put(ckey, csv);
    }
    SessionRecord next = record;
    next.version = record.version + 1;
    store.put(key(record.id, "session.json"), header_json(next, digest, cvr_files).dump(2) + "\n");
    record.version = next.version;
}

void AuditSession::save(KvStore& store) { save_session(store, record_, cvr_files_); }

SessionHeader parse_session_header(std::string_view text) {
    const Json h = Json::parse(text, nullptr, false);
    if (h.is_discarded()) throw IntegrityError("session.json is not valid JSON");
    SessionHeader out;
    SessionRecord& r = out.record;
    try {
        if (h.at("format_version").get<int>() != kFormatVersion) {
            throw IntegrityError("unsupported session format version " + h.at("format_version").dump());
        }
        r.id = h.at("id").get<std::string>();
        r.version = h.at("version").get<std::int64_t>();
        r.config = config_from_json(h.at("config"));
        r.manifest = h.at("manifest").get<Manifest>();
        r.tabulation = tabulation_from(h.at("tabulation"));
        r.normalized = tabulation_from(h.at("normalized"));
        r.mu = parse_rational(h.at("mu").get<std::string>());
        r.status = audit_status_from_string(h.at("status").get<std::string>());
        r.current_batch = h.at("current_batch").get<int>();
        out.iterations = h.at("iterations").get<std::size_t>();
        out.transcript_head = h.at("transcript_head").get<std::string>();
        if (h.contains("pending_cvr_sha256")) out.pending_cvr_sha256 = h.at("pending_cvr_sha256").get<std::string>();
    } catch (const Json::exception& e) {
        throw IntegrityError(std::string("session.json: ") + e.what());
    } catch (const ConfigError& e) {
        throw IntegrityError(std::string("session.json: ") + e.what());
    }
    return out;
}

StoredSession load_session(const KvStore& store, const std::string& id) {
    const auto text = store.get(key(id, "session.json"));
    if (!text) throw ConfigError("no session '" + id + "'");
    SessionHeader header = parse_session_header(*text);
    if (header.record.id != id) throw IntegrityError("session.json names session '" + header.record.id + "'");
    StoredSession out;
    SessionRecord& r = out.record;
    r = std::move(header.record);
    const std::size_t count = header.iterations;
    const std::string& head = header.transcript_head;
    const std::string pending_digest = header.pending_cvr_sha256;

    const auto transcript = store.get(key(id, "transcript.jsonl")).value_or("");
    const auto lines = split_lines(transcript);
    if (lines.size() < count) throw IntegrityError("transcript has fewer lines than session.json records");
    std::string digest = transcript_genesis(r.id, r.config.rng_seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string where = "transcript line " + std::to_string(i + 1) + ": ";
        const Json j = Json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) throw IntegrityError(where + "not valid JSON");
        IterationRecord rec;
        std::string stated;
        try {
            rec = record_from_json(j);
            stated = j.at("digest").get<std::string>();
        } catch (const Json::exception& e) {
            throw IntegrityError(where + e.what());
        }
        digest = transcript_line_digest(digest, rec);
        if (digest != stated) throw IntegrityError(where + "content digest mismatch");
        r.iterations.push_back(std::move(rec));
    }
    if (digest != head) throw IntegrityError("transcript head digest does not match session.json");

    for (std::int64_t b = 1; b <= static_cast<std::int64_t>(r.manifest.size()); ++b) {
        if (auto csv = store.get(key(id, "cvrs/" + std::to_string(b) + ".csv"))) {
            out.cvr_files.emplace(static_cast<int>(b), std::move(*csv));
        }
    }
    if (r.status == AuditStatus::AwaitingBallot) {
        const auto it = out.cvr_files.find(r.current_batch);
        if (it == out.cvr_files.end()) throw IntegrityError("CVR of the pending batch is missing");
        if (!pending_digest.empty() && sha256_hex(it->second) != pending_digest) {
            throw IntegrityError("CVR of the pending batch does not match session.json");
        }
    }
    return out;
}

AuditSession open_session(const KvStore& store, const std::string& id) {
    StoredSession s = load_session(store, id);
    return AuditSession::restore(std::move(s.record), std::move(s.cvr_files));
}

ReplayReport replay_transcript(const SessionRecord& header, std::string_view transcript_jsonl) {
    ReplayReport report;
    const Normalization norm = normalize_tabulation(header.manifest, header.tabulation, header.config.mode);
    const KmConfig km = header.config.km(norm.auditable ? norm.mu.to_double() : 1.0);
    const CounterRng rng(header.config.rng_seed);
    TestState test;
    std::string digest = transcript_genesis(header.id, header.config.rng_seed);
    const auto lines = split_lines(transcript_jsonl);
    auto fail = [&](std::size_t line, std::string message) {
        report.ok = false;
        report.first_bad_line = static_cast<std::int64_t>(line);
        report.message = std::move(message);
        return report;
    };
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line = i + 1;
        if (lines[i].empty()) continue;
        const Json j = Json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) return fail(line, "not valid JSON");
        IterationRecord rec;
        std::string stated;
        try {
            rec = record_from_json(j);
            stated = j.at("digest").get<std::string>();
        } catch (const Json::exception& e) {
            return fail(line, e.what());
        }
        if (!norm.auditable) return fail(line, "iteration recorded for an election with mu <= 0");
        if (test.stopped) return fail(line, "iteration recorded after the audit stopped");
        try {
            verify_recorded_draw(rng, header.manifest, static_cast<std::int64_t>(line), rec);
        } catch (const IntegrityError& e) {
            return fail(line, e.what());
        }
        test = test_step(std::move(test), rec.discrepancy, km);
        if (test.log_risk != rec.log_risk) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "log_risk " << rec.log_risk << " does not match recomputed " << test.log_risk;
            return fail(line, msg.str());
        }
        digest = transcript_line_digest(digest, rec);
        if (digest != stated) return fail(line, "content digest mismatch");
        report.lines = static_cast<std::int64_t>(line);
    }
    return report;
}

}  // namespace rla
