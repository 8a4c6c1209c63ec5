#pragma once

// HTTP/JSON audit service. The service plays the auditor; the audit team
// supplies CVR files and ballot interpretations. Field names are documented
// in docs/api.md.
//
// AuditService::handle is transport-independent (tests call it directly);
// HttpServer binds it to cpp-httplib and optionally serves a static bundle.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "rla/session.hpp"

namespace rla {

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class AuditService {
public:
    /// Sessions persist to `store` after every change.
    explicit AuditService(std::shared_ptr<KvStore> store);

    HttpResponse handle(std::string_view method, std::string_view path, std::string_view body,
                        const std::map<std::string, std::string>& query = {});

    Json create_session(const Json& request);
    Json draw(const std::string& id);
    Json submit_cvr(const std::string& id, std::string_view csv, std::optional<int> batch);
    Json submit_interpretation(const std::string& id, const Json& interpretation);
    Json get(const std::string& id);
    std::string transcript(const std::string& id);
    Json list() const;

private:
    struct Entry {
        std::mutex mu;
        std::optional<AuditSession> session;
    };

    std::shared_ptr<Entry> entry(const std::string& id);
    template <typename F>
    Json mutate(const std::string& id, F&& f);

    std::shared_ptr<KvStore> store_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// JSON view of a session (the ApiSessionView of docs/api.md).
Json session_view(const AuditSession& session);

class HttpServer {
public:
    HttpServer(AuditService& service, std::string static_dir = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds (port 0 picks a free port) and serves on a background thread;
    /// returns the bound port.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace rla
