#pragma once

// HTTP front end. Service holds one immutable model and answers requests as
// a pure function of (method, path, body); HttpServer exposes it over HTTP.
//
// Endpoints: GET /healthz, GET /model, POST /sample, /render, /edit,
// /autocomplete, /invert. Errors carry {"error": ..., "field": ...}.

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "blobgan/model.hpp"

namespace blobgan::service {

inline constexpr int kMaxRefineSteps = 1000;
inline constexpr int kMaxAutocompleteIters = 5000;

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class Service {
public:
    // Without a model every endpoint but /healthz answers 409. The
    // truncation mean is computed here when missing.
    explicit Service(std::optional<Model> model);

    Response handle(std::string_view method, std::string_view path, const std::string& body) const;

    bool has_model() const noexcept { return model_ != nullptr; }

private:
    std::shared_ptr<const Model> model_;
};

class HttpServer {
public:
    explicit HttpServer(const Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // port 0 picks a free port. Returns the bound port; throws StateError.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "host:port" from BLOBGAN_BIND-style strings; port defaults to `port`.
std::pair<std::string, int> parse_bind(std::string_view text, int port);

}  // namespace blobgan::service
