#include "rla/service.hpp"

#include <cmath>
#include <random>
#include <regex>

#include "httplib.h"
#include "rla/csv_io.hpp"
#include "rla/errors.hpp"

namespace rla {
namespace {

class NotFound : public Error {
public:
    using Error::Error;
};

class BadRequest : public Error {
public:
    using Error::Error;
};

std::string new_session_id() {
    std::random_device rd;
    const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json error_body(std::string_view kind, const std::string& message) {
    return Json{{"error", message}, {"kind", kind}};
}

Json parse_json(std::string_view body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw BadRequest("request body is not valid JSON");
    return j;
}

Interpretation interpretation_from(const Json& j) {
    if (!j.is_object()) throw BadRequest("interpretation must be a JSON object");
    if (j.contains("choice")) {
        const std::string c = j.at("choice").get<std::string>();
        if (c == "winner") return std::pair{1, 0};
        if (c == "loser") return std::pair{0, 1};
        if (c == "blank") return std::pair{0, 0};
        if (c == "both") return std::pair{1, 1};
        if (c == "missing") return std::nullopt;
        throw BadRequest("unknown choice '" + c + "'");
    }
    if (j.value("missing", false)) return std::nullopt;
    if (!j.contains("w") || !j.contains("l")) throw BadRequest("interpretation needs w and l, or missing: true");
    return std::pair{j.at("w").get<int>(), j.at("l").get<int>()};
}

}  // namespace

Json session_view(const AuditSession& s) {
    const SessionRecord& r = s.record();
    Json view{{"id", r.id},
              {"status", std::string(to_string(r.status))},
              {"mode", std::string(to_string(r.config.mode))},
              {"transform", std::string(to_string(r.config.transform))},
              {"seed", std::to_string(r.config.rng_seed)},
              {"alpha", r.config.alpha},
              {"gamma", r.config.gamma},
              {"ell_min", r.config.ell_min},
              {"ell_max", r.config.ell_max},
              {"rounds", r.config.rounds ? Json(*r.config.rounds) : Json(nullptr)},
              {"mu", r.mu.str()},
              {"mu_value", r.mu.to_double()},
              {"manifest", r.manifest},
              {"warnings", s.warnings()},
              {"iterations", r.iterations.size()},
              {"log_risk", s.log_risk()},
              {"risk", std::exp(s.log_risk())},
              {"current_batch", r.current_batch > 0 ? Json(r.current_batch) : Json(nullptr)},
              {"request", nullptr},
              {"verdict", nullptr},
              {"last_iteration", nullptr},
              {"version", r.version}};
    Json normalized = Json::array();
    for (const auto& t : r.normalized) normalized.push_back({{"s", t.s}, {"w", t.w}, {"l", t.l}});
    view["normalized"] = normalized;
    if (auto p = s.pending()) {
        if (r.config.mode == AuditMode::Group) {
            view["request"] = {{"batch", p->batch}, {"group", p->group}, {"declared_size", p->declared_size}};
        } else {
            view["request"] = {{"batch", p->batch}, {"row", p->row}, {"identifier", p->identifier}};
        }
    }
    if (auto v = s.verdict()) view["verdict"] = std::string(to_string(*v));
    if (!r.iterations.empty()) view["last_iteration"] = record_to_json(r.iterations.back());
    return view;
}

AuditService::AuditService(std::shared_ptr<KvStore> store) : store_(std::move(store)) {
    if (!store_) store_ = std::make_shared<MemoryStore>();
}

std::shared_ptr<AuditService::Entry> AuditService::entry(const std::string& id) {
    std::shared_ptr<Entry> e;
    {
        std::lock_guard lock(mu_);
        auto& slot = sessions_[id];
        if (!slot) slot = std::make_shared<Entry>();
        e = slot;
    }
    return e;
}

template <typename F>
Json AuditService::mutate(const std::string& id, F&& f) {
    auto e = entry(id);
    std::lock_guard lock(e->mu);
    if (!e->session) {
        try {
            e->session.emplace(open_session(*store_, id));
        } catch (const ConfigError&) {
            throw NotFound("no session '" + id + "'");
        }
    }
    Json extra = Json::object();
    try {
        extra = f(*e->session);
        e->session->save(*store_);
    } catch (const ConflictError&) {
        // Another writer moved the stored session on; reload on next use.
        e->session.reset();
        throw;
    } catch (...) {
        // A failed step leaves the engine untouched, but a failed save does not;
        // drop the cached copy so the next request reloads from storage.
        if (e->session && e->session->record().version == 0) e->session.reset();
        throw;
    }
    Json view = session_view(*e->session);
    for (auto& [k, v] : extra.items()) view[k] = v;
    return view;
}

Json AuditService::create_session(const Json& req) {
    if (!req.is_object()) throw BadRequest("request body must be a JSON object");
    if (!req.contains("manifest") || !req.contains("tabulation")) {
        throw BadRequest("request needs manifest and tabulation CSV strings");
    }
    Manifest manifest;
    Tabulation tabulation;
    try {
        manifest = parse_manifest(req.at("manifest").get<std::string>());
    } catch (ParseError& e) {
        throw ParseError(std::string("manifest: ") + e.what(), e.line(), e.column());
    }
    try {
        tabulation = parse_tabulation(req.at("tabulation").get<std::string>());
    } catch (ParseError& e) {
        throw ParseError(std::string("tabulation: ") + e.what(), e.line(), e.column());
    }
    Json cfg = req.value("config", Json::object());
    if (!cfg.contains("seed")) {
        std::random_device rd;
        cfg["seed"] = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    const AuditConfig config = config_from_json(cfg);
    const std::string id = new_session_id();
    auto e = entry(id);
    std::lock_guard lock(e->mu);
    e->session.emplace(id, std::move(manifest), std::move(tabulation), config);
    e->session->save(*store_);
    return session_view(*e->session);
}

Json AuditService::draw(const std::string& id) {
    return mutate(id, [](AuditSession& s) {
        const std::size_t before = s.record().iterations.size();
        const int batch = s.draw();
        Json extra{{"drawn_batch", batch}, {"completed", nullptr}};
        if (s.record().iterations.size() > before) extra["completed"] = record_to_json(s.record().iterations.back());
        return extra;
    });
}

Json AuditService::submit_cvr(const std::string& id, std::string_view csv, std::optional<int> batch) {
    return mutate(id, [&](AuditSession& s) {
        if (batch && s.status() == AuditStatus::AwaitingCvr && *batch != s.record().current_batch) {
            throw ConflictError("CVR is for batch " + std::to_string(*batch) + " but batch " +
                                std::to_string(s.record().current_batch) + " was drawn");
        }
        const std::size_t before = s.record().iterations.size();
        s.submit_cvr_csv(csv);
        Json extra{{"completed", nullptr}};
        if (s.record().iterations.size() > before) extra["completed"] = record_to_json(s.record().iterations.back());
        return extra;
    });
}

Json AuditService::submit_interpretation(const std::string& id, const Json& body) {
    return mutate(id, [&](AuditSession& s) {
        IterationRecord rec;
        if (s.record().config.mode == AuditMode::Group) {
            if (!body.is_object() || !body.contains("size")) throw BadRequest("group count needs size, w and l");
            rec = s.submit_group_count(
                {body.at("size").get<std::int64_t>(), body.value("w", std::int64_t{0}), body.value("l", std::int64_t{0})});
        } else {
            rec = s.submit_interpretation(interpretation_from(body));
        }
        return Json{{"completed", record_to_json(rec)}};
    });
}

Json AuditService::get(const std::string& id) {
    auto e = entry(id);
    std::lock_guard lock(e->mu);
    if (!e->session) {
        try {
            e->session.emplace(open_session(*store_, id));
        } catch (const ConfigError&) {
            throw NotFound("no session '" + id + "'");
        }
    }
    return session_view(*e->session);
}

std::string AuditService::transcript(const std::string& id) {
    auto e = entry(id);
    std::lock_guard lock(e->mu);
    auto text = store_->get(id + "/transcript.jsonl");
    if (!store_->get(id + "/session.json")) throw NotFound("no session '" + id + "'");
    return text.value_or("");
}

Json AuditService::list() const {
    Json ids = Json::array();
    for (const auto& s : store_->scopes()) {
        if (store_->get(s + "/session.json")) ids.push_back(s);
    }
    return Json{{"sessions", ids}};
}

HttpResponse AuditService::handle(std::string_view method, std::string_view path, std::string_view body,
                                  const std::map<std::string, std::string>& query) {
    static const std::regex kSession(R"(^/sessions/([A-Za-z0-9_-]+)(/(draw|cvr|interpretation|transcript))?/?$)");
    auto json = [](int status, const Json& j) { return HttpResponse{status, j.dump(), "application/json"}; };
    try {
        const std::string p(path);
        if (p == "/sessions" || p == "/sessions/") {
            if (method == "POST") return json(201, create_session(parse_json(body)));
            if (method == "GET") return json(200, list());
            return json(405, error_body("method", "method not allowed"));
        }
        std::smatch m;
        if (!std::regex_match(p, m, kSession)) return json(404, error_body("not_found", "no such endpoint"));
        const std::string id = m[1];
        const std::string action = m[3];
        if (action.empty()) {
            if (method != "GET") return json(405, error_body("method", "method not allowed"));
            return json(200, get(id));
        }
        if (action == "transcript") {
            if (method != "GET") return json(405, error_body("method", "method not allowed"));
            return HttpResponse{200, transcript(id), "application/x-ndjson"};
        }
        if (method != "POST") return json(405, error_body("method", "method not allowed"));
        if (action == "draw") return json(200, draw(id));
        if (action == "cvr") {
            std::optional<int> batch;
            if (auto it = query.find("batch"); it != query.end()) {
                try {
                    batch = std::stoi(it->second);
                } catch (const std::logic_error&) {
                    throw BadRequest("batch query parameter is not an integer");
                }
            }
            return json(200, submit_cvr(id, body, batch));
        }
        return json(200, submit_interpretation(id, parse_json(body)));
    } catch (const ParseError& e) {
        Json j = error_body("parse", e.what());
        if (e.line()) j["line"] = e.line();
        if (e.column()) j["column"] = e.column();
        return json(400, j);
    } catch (const BadRequest& e) {
        return json(400, error_body("bad_request", e.what()));
    } catch (const Json::exception& e) {
        return json(400, error_body("bad_request", e.what()));
    } catch (const NotFound& e) {
        return json(404, error_body("not_found", e.what()));
    } catch (const StateError& e) {
        return json(409, error_body("state", e.what()));
    } catch (const ConflictError& e) {
        return json(409, error_body("conflict", e.what()));
    } catch (const ConfigError& e) {
        return json(422, error_body("config", e.what()));
    } catch (const IntegrityError& e) {
        return json(500, error_body("integrity", e.what()));
    } catch (const std::exception& e) {
        return json(500, error_body("internal", e.what()));
    }
}

// -------------------------------------------------------------------- http

struct HttpServer::Impl {
    AuditService& service;
    httplib::Server server;

    Impl(AuditService& s, const std::string& static_dir) : service(s) {
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            std::map<std::string, std::string> query;
            for (const auto& [k, v] : req.params) query.emplace(k, v);
            const HttpResponse out = service.handle(req.method, req.path, req.body, query);
            res.status = out.status;
            res.set_content(out.body, out.content_type);
        };
        server.Get(R"(/sessions(/.*)?)", route);
        server.Post(R"(/sessions(/.*)?)", route);
        if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
            throw ConfigError("static directory '" + static_dir + "' does not exist");
        }
    }
};

HttpServer::HttpServer(AuditService& service, std::string static_dir)
    : impl_(std::make_unique<Impl>(service, static_dir)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace rla
