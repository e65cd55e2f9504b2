#include "blobgan/service.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "blobgan/edit.hpp"
#include "blobgan/errors.hpp"
#include "blobgan/inversion.hpp"
#include "blobgan/io/commands.hpp"
#include "blobgan/io/config_json.hpp"
#include "blobgan/io/image.hpp"
#include "blobgan/io/scene_document.hpp"

namespace blobgan::service {
namespace {

using nlohmann::json;

// Raised inside handlers and turned into an error response.
struct HttpError {
    int status;
    std::string field;
    std::string message;
};

Response reply(const json& j, int status = 200) { return {status, j.dump(), "application/json"}; }

Response error_reply(const HttpError& e) {
    json j = {{"error", e.message}};
    if (!e.field.empty()) j["field"] = e.field;
    return reply(j, e.status);
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, "body", std::string("invalid JSON: ") + e.what()};
    }
    if (!j.is_object()) throw HttpError{400, "body", "expected an object"};
    return j;
}

void only_keys(const json& j, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw HttpError{400, it.key(), "unexpected field"};
    }
}

std::uint64_t get_seed(const json& j) {
    if (!j.contains("seed")) return 0;
    const json& v = j["seed"];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw HttpError{400, "seed", "expected a non-negative integer"};
}

int get_int(const json& j, const char* key, int fallback, int lo, int hi) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (!v.is_number_integer()) throw HttpError{400, key, "expected an integer"};
    const std::int64_t x = v.get<std::int64_t>();
    if (x < lo || x > hi) {
        throw HttpError{400, key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
    }
    return static_cast<int>(x);
}

const json& require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw HttpError{400, key, "missing"};
    return *it;
}

// Format errors become 400s carrying the JSON path.
template <class F>
auto parsed(F&& f) {
    try {
        return f();
    } catch (const FormatError& e) {
        throw HttpError{400, e.section(), e.what()};
    }
}

BlobScene read_scene(const json& j, const Model& model) {
    BlobScene scene = parsed([&] { return io::scene_from_json(require(j, "scene"), "scene"); });
    if (static_cast<std::int64_t>(scene.d_in()) != model.cfg.layout.d_in ||
        static_cast<std::int64_t>(scene.d_style()) != model.cfg.layout.d_style) {
        throw HttpError{422, "scene",
                        "scene feature sizes (" + std::to_string(scene.d_in()) + ", " +
                            std::to_string(scene.d_style()) + ") do not match the model (" +
                            std::to_string(model.cfg.layout.d_in) + ", " + std::to_string(model.cfg.layout.d_style) +
                            ")"};
    }
    try {
        validate_scene(scene);
    } catch (const DomainError& e) {
        throw HttpError{422, "scene", e.what()};
    }
    return scene;
}

std::string image_png(const Tensor& images, std::int64_t index) {
    return io::base64_encode(io::encode_png_rgb(images.slice(index)));
}

json model_info(const Model& m) {
    const auto& lc = m.cfg.layout;
    return {{"k", lc.k},
            {"d_in", lc.d_in},
            {"d_style", lc.d_style},
            {"d_noise", lc.d_noise},
            {"d_hidden", lc.d_hidden},
            {"c", m.cfg.c},
            {"resolutions", m.cfg.decoder.resolutions()},
            {"step", m.step},
            {"model", io::to_json(m.cfg)},
            {"train", io::to_json(m.train)},
            {"max_refine_steps", kMaxRefineSteps},
            {"max_autocomplete_iters", kMaxAutocompleteIters}};
}

Response sample(const Model& m, const json& j) {
    only_keys(j, {"seed", "truncation"});
    const std::uint64_t seed = get_seed(j);
    float w = 1.0f;
    if (j.contains("truncation")) {
        const json& v = j["truncation"];
        if (!v.is_number()) throw HttpError{400, "truncation", "expected a number"};
        w = v.get<float>();
        if (!(w >= 0.0f && w <= 1.0f)) throw HttpError{400, "truncation", "must lie in [0, 1]"};
    }
    BlobScene scene = sample_scenes(m, m.g_ema, {seed}, w).at(0);
    RenderOutput out = render(m, m.g_ema, {scene});
    return reply({{"scene", io::scene_to_json(scene)}, {"image", image_png(out.images, 0)}});
}

Response render_scene(const Model& m, const json& j) {
    only_keys(j, {"scene", "return_alpha"});
    BlobScene scene = read_scene(j, m);
    bool want_alpha = false;
    if (j.contains("return_alpha")) {
        if (!j["return_alpha"].is_boolean()) throw HttpError{400, "return_alpha", "expected a boolean"};
        want_alpha = j["return_alpha"].get<bool>();
    }
    RenderOutput out = render(m, m.g_ema, {scene});
    json r = {{"image", image_png(out.images, 0)}};
    if (want_alpha) {
        Tensor alpha = out.alpha.slice(0);  // [k+1,R,R]
        json maps = json::array();
        for (std::int64_t i = 1; i < alpha.dim(0); ++i) {
            maps.push_back(io::base64_encode(io::encode_png_gray(alpha.slice(i))));
        }
        r["alpha_maps"] = maps;
    }
    return reply(r);
}

Response edit(const Model& m, const json& j) {
    only_keys(j, {"scene", "edits"});
    BlobScene scene = read_scene(j, m);
    auto edits = parsed([&] { return io::edits_from_json(require(j, "edits"), "edits"); });
    for (std::size_t i = 0; i < edits.size(); ++i) {
        try {
            scene = apply_edit(scene, edits[i]);
        } catch (const DomainError& e) {
            throw HttpError{422, "edits[" + std::to_string(i) + "]", e.what()};
        }
    }
    return reply({{"scene", io::scene_to_json(scene)}});
}

Response complete(const Model& m, const json& j) {
    only_keys(j, {"constraints", "seed", "iters"});
    ConstraintSet cs = parsed([&] { return io::constraints_from_json(require(j, "constraints"), "constraints"); });
    try {
        validate_constraints(cs, m.cfg.layout);
    } catch (const DomainError& e) {
        throw HttpError{422, "constraints", e.what()};
    }
    AutocompleteOptions opts;
    opts.seed = get_seed(j);
    opts.z_init = noise_for_seed(m.cfg.layout, opts.seed);
    opts.iters = get_int(j, "iters", opts.iters, 0, kMaxAutocompleteIters);
    AutocompleteResult r = autocomplete(m.layout, m.g_ema, cs, m.cfg.c, opts);
    return reply({{"scene", io::scene_to_json(r.scene)},
                  {"final_loss", r.final_loss},
                  {"initial_loss", r.initial_loss},
                  {"iters", opts.iters},
                  {"stalled", r.stalled}});
}

Response invert_image(const Model& m, const json& j) {
    only_keys(j, {"image", "refine_steps"});
    const json& img = require(j, "image");
    if (!img.is_string()) throw HttpError{400, "image", "expected a base64 PNG string"};
    Tensor image;
    try {
        image = io::decode_png_rgb(io::base64_decode(img.get<std::string>()));
    } catch (const FormatError& e) {
        throw HttpError{400, "image", e.what()};
    }
    const std::int64_t res = m.cfg.decoder.out_res;
    if (image.dim(1) != res || image.dim(2) != res) {
        throw HttpError{422, "image",
                        "image is " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(1)) +
                            ", the model renders " + std::to_string(res) + "x" + std::to_string(res)};
    }
    InvertOptions opts;
    opts.refine_steps = get_int(j, "refine_steps", opts.refine_steps, 0, kMaxRefineSteps);
    InversionResult r = invert(m, image, opts);
    return reply({{"scene", io::scene_to_json(r.scene)},
                  {"rmse", r.rmse},
                  {"initial_rmse", r.initial_rmse},
                  {"refine_steps", opts.refine_steps},
                  {"non_finite", r.non_finite}});
}

}  // namespace

Service::Service(std::optional<Model> model) {
    if (model) {
        ensure_truncation_mean(*model);
        model_ = std::make_shared<const Model>(std::move(*model));
    }
}

Response Service::handle(std::string_view method, std::string_view path, const std::string& body) const {
    using Handler = Response (*)(const Model&, const json&);
    struct Route {
        std::string_view path;
        Handler post;
    };
    static constexpr Route kPost[] = {{"/sample", sample},     {"/render", render_scene},  {"/edit", edit},
                                      {"/autocomplete", complete}, {"/invert", invert_image}};
    try {
        if (path == "/healthz") {
            if (method != "GET") throw HttpError{405, "", "use GET"};
            return reply({{"status", "ok"}, {"model_loaded", has_model()}});
        }
        if (path == "/model") {
            if (method != "GET") throw HttpError{405, "", "use GET"};
            if (!model_) throw HttpError{409, "", "no model loaded"};
            return reply(model_info(*model_));
        }
        for (const Route& r : kPost) {
            if (path != r.path) continue;
            if (method != "POST") throw HttpError{405, "", "use POST"};
            if (!model_) throw HttpError{409, "", "no model loaded"};
            return r.post(*model_, parse_body(body));
        }
        throw HttpError{404, "", "no such endpoint"};
    } catch (const HttpError& e) {
        return error_reply(e);
    } catch (const DomainError& e) {
        return error_reply({422, "", e.what()});
    } catch (const std::exception& e) {
        return error_reply({500, "", e.what()});
    }
}

struct HttpServer::Impl {
    const Service& service;
    httplib::Server server;

    explicit Impl(const Service& s) : service(s) {
        auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            Response r = service.handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        server.Get(".*", forward);
        server.Post(".*", forward);
        server.Put(".*", forward);
        server.Delete(".*", forward);
    }
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw StateError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

std::pair<std::string, int> parse_bind(std::string_view text, int port) {
    std::string host(text);
    const auto colon = host.rfind(':');
    if (colon != std::string::npos) {
        const std::string p = host.substr(colon + 1);
        host.resize(colon);
        try {
            std::size_t used = 0;
            port = std::stoi(p, &used);
            if (used != p.size() || port < 0 || port > 65535) throw std::invalid_argument(p);
        } catch (const std::exception&) {
            throw DomainError("bad port in bind address '" + std::string(text) + "'");
        }
    }
    if (host.empty()) host = "127.0.0.1";
    return {host, port};
}

}  // namespace blobgan::service
