// blobgan: train | sample | render | edit | autocomplete | invert | eval | serve
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.
// BLOBGAN_CHECKPOINT supplies a default --checkpoint, BLOBGAN_BIND a default
// "host[:port]" for serve.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blobgan/edit.hpp"
#include "blobgan/errors.hpp"
#include "blobgan/inversion.hpp"
#include "blobgan/io/checkpoint.hpp"
#include "blobgan/io/commands.hpp"
#include "blobgan/io/config_json.hpp"
#include "blobgan/io/image.hpp"
#include "blobgan/io/scene_document.hpp"
#include "blobgan/metrics.hpp"
#include "blobgan/service.hpp"
#include "blobgan/train.hpp"

namespace fs = std::filesystem;
using namespace blobgan;

namespace {

struct Options {
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    float truncation = 1.0f;
    std::string out;
    std::string scene;
    std::string edits;
    std::string image;
    std::string constraints;
    std::string config;
    std::string log;
    std::int64_t steps = -1;
    int port = 8080;
    int samples = 500;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string need(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
    return value;
}

Model load_model(const Options& o) { return io::load_checkpoint(need(o.checkpoint, "--checkpoint")); }

// PREFIX.json / PREFIX.png from --out, tolerating a given extension.
fs::path prefix(const std::string& out) {
    fs::path p(need(out, "--out"));
    if (p.extension() == ".json" || p.extension() == ".png") p.replace_extension();
    return p;
}

void write_scene_and_png(const Model& m, const BlobScene& scene, const fs::path& base) {
    io::save_scene(scene, fs::path(base).concat(".json"));
    RenderOutput r = render(m, m.g_ema, {scene});
    io::write_file(fs::path(base).concat(".png"), io::encode_png_rgb(r.images.slice(0)));
}

nlohmann::json read_json(const std::string& path, const char* what) {
    try {
        return nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(what, e.what());
    }
}

int cmd_train(const Options& o) {
    const fs::path out = need(o.out, "--out");
    Model model;
    if (!o.checkpoint.empty() && fs::exists(o.checkpoint)) {
        model = io::load_checkpoint(o.checkpoint);
    } else {
        ModelConfig cfg = ModelConfig::desk();
        TrainConfig tc;
        if (!o.config.empty()) {
            nlohmann::json j = read_json(o.config, "config");
            if (!j.is_object()) throw FormatError("config", "expected an object");
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (it.key() != "model" && it.key() != "train") {
                    throw FormatError("config", "unknown key '" + it.key() + "'");
                }
            }
            if (j.contains("model")) io::merge_json(j["model"], cfg);
            if (j.contains("train")) io::merge_json(j["train"], tc);
        }
        if (o.seed_set) tc.seed = o.seed;
        model = Model::create(cfg, tc.seed);
        model.train = tc;
    }
    if (o.steps >= 0) model.train.steps = o.steps;

    std::ofstream log_file;
    std::ostream* log = &std::cout;
    if (!o.log.empty()) {
        log_file.open(o.log, std::ios::app);
        if (!log_file) throw std::runtime_error("cannot open log " + o.log);
        log = &log_file;
    }
    Trainer trainer(model);
    trainer.run(log, [&](const Model& m, bool diagnostic) {
        io::save_checkpoint(m, diagnostic ? fs::path(out).concat(".diagnostic") : out);
    });
    if (model.encoder_step < model.train.encoder_steps) {
        *log << "# encoder\n";
        train_encoder(model, model.train.encoder_steps - model.encoder_step, log);
    }
    model.trunc_mean = Tensor();
    ensure_truncation_mean(model);
    io::save_checkpoint(model, out);
    return 0;
}

int cmd_sample(const Options& o) {
    Model m = load_model(o);
    if (o.truncation < 1.0f) ensure_truncation_mean(m);
    BlobScene scene = sample_scenes(m, m.g_ema, {o.seed}, o.truncation).at(0);
    write_scene_and_png(m, scene, prefix(o.out));
    return 0;
}

int cmd_render(const Options& o) {
    Model m = load_model(o);
    BlobScene scene = io::load_scene(need(o.scene, "--scene"));
    RenderOutput r = render(m, m.g_ema, {scene});
    fs::path out = prefix(o.out);
    io::write_file(out.concat(".png"), io::encode_png_rgb(r.images.slice(0)));
    return 0;
}

int cmd_edit(const Options& o) {
    BlobScene scene = io::load_scene(need(o.scene, "--scene"));
    auto edits = io::edits_from_json(read_json(need(o.edits, "--edits"), "edits"));
    io::save_scene(apply_edits(scene, edits), prefix(o.out).concat(".json"));
    return 0;
}

int cmd_autocomplete(const Options& o) {
    Model m = load_model(o);
    ConstraintSet cs = io::constraints_from_json(read_json(need(o.constraints, "--constraints"), "constraints"));
    AutocompleteOptions opts;
    opts.seed = o.seed;
    opts.z_init = noise_for_seed(m.cfg.layout, o.seed);
    if (o.steps >= 0) opts.iters = static_cast<int>(o.steps);
    AutocompleteResult r = autocomplete(m.layout, m.g_ema, cs, m.cfg.c, opts);
    write_scene_and_png(m, r.scene, prefix(o.out));
    std::printf("final_loss = %.9g\n", r.final_loss);
    if (r.stalled) std::printf("stalled = 1\n");
    return 0;
}

int cmd_invert(const Options& o) {
    Model m = load_model(o);
    Tensor image = io::decode_png_rgb(io::read_file(need(o.image, "--image")));
    InvertOptions opts;
    if (o.steps >= 0) opts.refine_steps = static_cast<int>(o.steps);
    InversionResult r = invert(m, image, opts);
    write_scene_and_png(m, r.scene, prefix(o.out));
    std::printf("initial_rmse = %.9g\nrmse = %.9g\n", r.initial_rmse, r.rmse);
    if (r.non_finite) std::printf("non_finite = 1\n");
    return 0;
}

int cmd_eval(const Options& o) {
    Model m = load_model(o);
    const int n = o.samples;
    if (n < 4) throw UsageError("--samples must be at least 4");
    ToySceneGenerator data(o.seed ^ 0xe7a1ull, m.cfg.decoder.out_res);
    Tensor real = data.batch(n);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < n; ++i) seeds.push_back(o.seed * 1000003ull + static_cast<std::uint64_t>(i));
    auto scenes = sample_scenes(m, m.g_ema, seeds);
    Tensor fake = render(m, m.g_ema, scenes).images;
    // Each scene with its top blob removed.
    std::vector<BlobScene> edited;
    for (const auto& sc : scenes) edited.push_back(apply_edit(sc, {.kind = EditKind::kRemove, .target = sc.k() - 1}));
    Tensor removed = render(m, m.g_ema, edited).images;

    FeatureExtractor disc = disc_features(m);
    Tensor f_real = disc(real), f_fake = disc(fake), f_removed = disc(removed);
    MetricReport report;
    report.add("step", static_cast<double>(m.step));
    report.add("samples", n);
    report.add("fd_disc", frechet_distance(f_real, f_fake));
    report.add("fd_pixels", frechet_distance(raw_pixels()(real), raw_pixels()(fake)));
    PrecisionRecall pr = precision_recall(f_real, f_fake);
    report.add("precision", pr.precision);
    report.add("recall", pr.recall);
    report.add("gd", global_diversity(f_fake));
    report.add("pd_remove", paired_distance(f_fake, f_removed));
    report.add("gd_remove", global_diversity(f_removed));
    double unchanged = 0.0;
    for (int i = 0; i < n; ++i) unchanged += edit_consistency(fake.slice(i), removed.slice(i)).unchanged;
    report.add("consistency_remove", unchanged / n);

    fs::path out = o.out.empty() ? fs::path(o.checkpoint).concat(".metrics.txt") : fs::path(o.out);
    report.write(out);
    std::cout << report.text();
    return 0;
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, bool port_set) {
    std::optional<Model> model;
    if (!o.checkpoint.empty()) model = io::load_checkpoint(o.checkpoint);
    std::string host = "127.0.0.1";
    int port = o.port;
    if (const char* bind = std::getenv("BLOBGAN_BIND"); bind && *bind) {
        std::tie(host, port) = service::parse_bind(bind, o.port);
        if (port_set) port = o.port;
    }
    service::Service svc(std::move(model));
    service::HttpServer server(svc);
    const int bound = server.bind(host, port);
    std::cerr << "listening on " << host << ":" << bound << (svc.has_model() ? "" : " (no model loaded)") << '\n';
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blob-based layered scene GAN"};
    app.require_subcommand(1);
    Options o;
    if (const char* env = std::getenv("BLOBGAN_CHECKPOINT")) o.checkpoint = env;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", o.checkpoint, "model checkpoint (default: $BLOBGAN_CHECKPOINT)");
        sub->add_option("--out", o.out, "output path or prefix");
    };
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { o.seed = s; o.seed_set = true; }, "random seed");
    };

    auto* train = app.add_subcommand("train", "train a model on toy scenes (resumes from --checkpoint if present)");
    add_common(train);
    add_seed(train);
    train->add_option("--config", o.config, "JSON file {\"model\": {...}, \"train\": {...}}")->check(CLI::ExistingFile);
    train->add_option("--steps", o.steps, "total adversarial steps");
    train->add_option("--log", o.log, "append the training log here instead of stdout");

    auto* sample = app.add_subcommand("sample", "sample a scene; writes OUT.json and OUT.png");
    add_common(sample);
    add_seed(sample);
    sample->add_option("--truncation", o.truncation, "truncation weight in [0,1]")->check(CLI::Range(0.0f, 1.0f));

    auto* rend = app.add_subcommand("render", "render a scene document to OUT.png");
    add_common(rend);
    rend->add_option("--scene", o.scene, "scene document")->check(CLI::ExistingFile);

    auto* ed = app.add_subcommand("edit", "apply an edit list to a scene; writes OUT.json");
    add_common(ed);
    ed->add_option("--scene", o.scene, "scene document")->check(CLI::ExistingFile);
    ed->add_option("--edits", o.edits, "JSON array of edit commands")->check(CLI::ExistingFile);

    auto* ac = app.add_subcommand("autocomplete", "constrained sampling; writes OUT.json and OUT.png");
    add_common(ac);
    add_seed(ac);
    ac->add_option("--constraints", o.constraints, "JSON array of constraints")->check(CLI::ExistingFile);
    ac->add_option("--steps", o.steps, "optimizer iterations (default 300)");

    auto* inv = app.add_subcommand("invert", "invert a PNG; writes OUT.json and OUT.png");
    add_common(inv);
    inv->add_option("--image", o.image, "PNG image")->check(CLI::ExistingFile);
    inv->add_option("--steps", o.steps, "refinement steps (default 200)");

    auto* ev = app.add_subcommand("eval", "write a metric report (default CHECKPOINT.metrics.txt)");
    add_common(ev);
    add_seed(ev);
    ev->add_option("--samples", o.samples, "images per set");

    auto* serve = app.add_subcommand("serve", "HTTP service (bind address from $BLOBGAN_BIND)");
    serve->add_option("--checkpoint", o.checkpoint, "model checkpoint (default: $BLOBGAN_CHECKPOINT)");
    auto* port_opt = serve->add_option("--port", o.port, "port (default 8080)")->check(CLI::Range(0, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) return cmd_train(o);
        if (*sample) return cmd_sample(o);
        if (*rend) return cmd_render(o);
        if (*ed) return cmd_edit(o);
        if (*ac) return cmd_autocomplete(o);
        if (*inv) return cmd_invert(o);
        if (*ev) return cmd_eval(o);
        if (*serve) return cmd_serve(o, port_opt->count() > 0);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
