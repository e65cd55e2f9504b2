#include "blobgan/io/config_json.hpp"

#include <set>

#include "blobgan/errors.hpp"

namespace blobgan::io {
namespace {

using nlohmann::json;

// Reads the keys of one JSON object into fields, rejecting unknown keys.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw FormatError("config", path_ + " must be an object");
    }
    template <typename T>
    void field(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw FormatError("config", path_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw FormatError("config", path_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json convnet_json(const ConvNetConfig& c) {
    return {{"in_res", c.in_res}, {"channels", c.channels}, {"hidden", c.hidden}, {"out", c.out}};
}

void merge_convnet(const json& j, ConvNetConfig& c, const std::string& path) {
    Reader r(j, path);
    r.field("in_res", c.in_res);
    r.field("channels", c.channels);
    r.field("hidden", c.hidden);
    r.field("out", c.out);
    r.finish();
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
    const LayoutConfig& l = cfg.layout;
    const DecoderConfig& d = cfg.decoder;
    return {
        {"layout",
         {{"k", l.k},
          {"d_in", l.d_in},
          {"d_style", l.d_style},
          {"d_noise", l.d_noise},
          {"d_hidden", l.d_hidden},
          {"layers", l.layers},
          {"lr_mult", l.lr_mult},
          {"s_bias_init", l.s_bias_init}}},
        {"decoder",
         {{"d_in", d.d_in},
          {"d_style", d.d_style},
          {"base_res", d.base_res},
          {"out_res", d.out_res},
          {"channels", d.channels}}},
        {"disc", convnet_json(cfg.disc)},
        {"encoder", convnet_json(cfg.encoder)},
        {"c", cfg.c},
    };
}

nlohmann::json to_json(const TrainConfig& t) {
    return {
        {"lr", t.lr},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"r1_gamma", t.r1_gamma},
        {"r1_period", t.r1_period},
        {"ema_decay", t.ema_decay},
        {"batch", t.batch},
        {"steps", t.steps},
        {"jitter", {{"dx", t.jitter.dx}, {"ds", t.jitter.ds}, {"dtheta", t.jitter.dtheta}}},
        {"seed", t.seed},
        {"style_mix_prob", t.style_mix_prob},
        {"blob_dropout_prob", t.blob_dropout_prob},
        {"checkpoint_every", t.checkpoint_every},
        {"encoder_steps", t.encoder_steps},
        {"encoder_lr", t.encoder_lr},
        {"encoder_beta_weight", t.encoder_beta_weight},
    };
}

void merge_json(const nlohmann::json& j, ModelConfig& cfg) {
    Reader r(j, "model");
    if (const json* l = r.child("layout")) {
        Reader lr(*l, "model.layout");
        lr.field("k", cfg.layout.k);
        lr.field("d_in", cfg.layout.d_in);
        lr.field("d_style", cfg.layout.d_style);
        lr.field("d_noise", cfg.layout.d_noise);
        lr.field("d_hidden", cfg.layout.d_hidden);
        lr.field("layers", cfg.layout.layers);
        lr.field("lr_mult", cfg.layout.lr_mult);
        lr.field("s_bias_init", cfg.layout.s_bias_init);
        lr.finish();
    }
    if (const json* d = r.child("decoder")) {
        Reader dr(*d, "model.decoder");
        dr.field("d_in", cfg.decoder.d_in);
        dr.field("d_style", cfg.decoder.d_style);
        dr.field("base_res", cfg.decoder.base_res);
        dr.field("out_res", cfg.decoder.out_res);
        dr.field("channels", cfg.decoder.channels);
        dr.finish();
    }
    if (const json* d = r.child("disc")) merge_convnet(*d, cfg.disc, "model.disc");
    if (const json* e = r.child("encoder")) merge_convnet(*e, cfg.encoder, "model.encoder");
    r.field("c", cfg.c);
    r.finish();
}

void merge_json(const nlohmann::json& j, TrainConfig& t) {
    Reader r(j, "train");
    r.field("lr", t.lr);
    r.field("beta1", t.beta1);
    r.field("beta2", t.beta2);
    r.field("r1_gamma", t.r1_gamma);
    r.field("r1_period", t.r1_period);
    r.field("ema_decay", t.ema_decay);
    r.field("batch", t.batch);
    r.field("steps", t.steps);
    if (const json* jj = r.child("jitter")) {
        Reader jr(*jj, "train.jitter");
        jr.field("dx", t.jitter.dx);
        jr.field("ds", t.jitter.ds);
        jr.field("dtheta", t.jitter.dtheta);
        jr.finish();
    }
    r.field("seed", t.seed);
    r.field("style_mix_prob", t.style_mix_prob);
    r.field("blob_dropout_prob", t.blob_dropout_prob);
    r.field("checkpoint_every", t.checkpoint_every);
    r.field("encoder_steps", t.encoder_steps);
    r.field("encoder_lr", t.encoder_lr);
    r.field("encoder_beta_weight", t.encoder_beta_weight);
    r.finish();
}

}  // namespace blobgan::io
