#include "blobgan/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "blobgan/errors.hpp"
#include "blobgan/io/config_json.hpp"
#include "blobgan/io/image.hpp"

namespace blobgan::io {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'B', 'L', 'B', 'G'};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Cursor {
public:
    explicit Cursor(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const std::string& section) {
        need(sizeof(T), section);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string take(std::size_t n, const std::string& section) {
        need(n, section);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void read_floats(float* dst, std::size_t n, const std::string& section) {
        need(n * sizeof(float), section);
        std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const std::string& section) const {
        if (bytes_.size() - pos_ < n) throw FormatError(section, "unexpected end of data");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    out.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.numel()) * sizeof(float));
}

const std::pair<const char*, ParamSet Model::*> kGroups[] = {
    {"g/", &Model::g_params},
    {"g_ema/", &Model::g_ema},
    {"d/", &Model::d_params},
    {"e/", &Model::e_params},
};

}  // namespace

std::string encode_checkpoint(const Model& model) {
    nlohmann::json header = {
        {"k", model.cfg.layout.k},
        {"d_in", model.cfg.layout.d_in},
        {"d_style", model.cfg.layout.d_style},
        {"d_noise", model.cfg.layout.d_noise},
        {"d_hidden", model.cfg.layout.d_hidden},
        {"c", model.cfg.c},
        {"resolutions", model.cfg.decoder.resolutions()},
        {"model", to_json(model.cfg)},
        {"train", to_json(model.train)},
        {"step", model.step},
        {"encoder_step", model.encoder_step},
    };
    const std::string text = header.dump();
    std::string out(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    std::uint32_t count = model.trunc_mean.numel() > 0 ? 1 : 0;
    for (const auto& [prefix, member] : kGroups) count += static_cast<std::uint32_t>((model.*member).size());
    put<std::uint32_t>(out, count);
    for (const auto& [prefix, member] : kGroups) {
        const ParamSet& ps = model.*member;
        for (std::size_t i = 0; i < ps.size(); ++i) put_tensor(out, prefix + ps.name(i), ps.value(i));
    }
    if (model.trunc_mean.numel() > 0) put_tensor(out, "trunc_mean", model.trunc_mean);
    return out;
}

Model decode_checkpoint(const std::string& bytes) {
    Cursor cur(bytes);
    if (cur.take(4, "magic") != std::string(kMagic, 4)) throw FormatError("magic", "not a BLBG checkpoint");
    const auto version = cur.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("version", "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = cur.get<std::uint32_t>("header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(cur.take(header_len, "header"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("header", e.what());
    }
    ModelConfig cfg;
    TrainConfig train;
    std::int64_t step = 0, encoder_step = 0;
    try {
        merge_json(header.at("model"), cfg);
        merge_json(header.at("train"), train);
        step = header.at("step").get<std::int64_t>();
        encoder_step = header.value("encoder_step", std::int64_t{0});
        if (header.at("k").get<std::int64_t>() != cfg.layout.k) throw FormatError("header", "k disagrees with model");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("header", e.what());
    } catch (const FormatError& e) {
        throw FormatError("header", e.what());
    }
    Model model;
    try {
        model = Model::create(cfg, 0);
    } catch (const DomainError& e) {
        throw FormatError("header", e.what());
    }
    model.train = train;
    model.step = step;
    model.encoder_step = encoder_step;

    std::map<std::string, Tensor*> slots;
    for (const auto& [prefix, member] : kGroups) {
        ParamSet& ps = model.*member;
        for (std::size_t i = 0; i < ps.size(); ++i) slots[prefix + ps.name(i)] = &ps.value(i);
    }
    const auto count = cur.get<std::uint32_t>("tensors");
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto name_len = cur.get<std::uint32_t>("tensors");
        const std::string name = cur.take(name_len, "tensors");
        const std::string section = "tensor:" + name;
        const auto rank = cur.get<std::uint32_t>(section);
        if (rank > 8) throw FormatError(section, "implausible rank " + std::to_string(rank));
        Shape shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::int64_t>(cur.get<std::uint64_t>(section)));
        Tensor* dst = nullptr;
        if (name == "trunc_mean") {
            if (shape != Shape{cfg.layout.d_hidden}) throw FormatError(section, "shape " + shape_string(shape));
            model.trunc_mean = Tensor(shape);
            dst = &model.trunc_mean;
        } else {
            auto it = slots.find(name);
            if (it == slots.end()) throw FormatError(section, "unknown tensor");
            if (it->second->shape() != shape) {
                throw FormatError(section, "shape " + shape_string(shape) + ", model expects " +
                                               shape_string(it->second->shape()));
            }
            dst = it->second;
            slots.erase(it);
        }
        cur.read_floats(dst->data(), static_cast<std::size_t>(dst->numel()), section);
    }
    if (!slots.empty()) throw FormatError("tensors", "missing tensor " + slots.begin()->first);
    if (!cur.done()) throw FormatError("tensors", "trailing bytes after the tensor table");
    return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace blobgan::io
