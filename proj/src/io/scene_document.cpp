#include "blobgan/io/scene_document.hpp"

#include <cmath>
#include <cstdio>

#include "blobgan/errors.hpp"
#include "blobgan/io/image.hpp"

namespace blobgan::io {
namespace {

using nlohmann::json;

void number(std::string& out, float v) {
    if (!std::isfinite(v)) throw DomainError("scene document: non-finite value");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    out += buf;
}

void vector(std::string& out, const std::vector<float>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        number(out, v[i]);
    }
    out += ']';
}

float get_float(const json& j, const std::string& path) {
    if (!j.is_number()) throw FormatError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw FormatError(path, "non-finite number");
    return static_cast<float>(v);
}

std::vector<float> get_vector(const json& j, const std::string& path) {
    if (!j.is_array()) throw FormatError(path, "expected an array");
    std::vector<float> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_float(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

const json& member(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) throw FormatError(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(path + "." + key, "missing");
    return *it;
}

}  // namespace

std::string encode_scene(const BlobScene& scene) {
    validate_scene(scene);
    std::string out = "{\n  \"version\": " + std::to_string(kSceneDocumentVersion) +
                      ",\n  \"k\": " + std::to_string(scene.k()) + ",\n  \"c\": ";
    number(out, scene.c);
    out += ",\n  \"blobs\": [";
    for (std::size_t i = 0; i < scene.blobs.size(); ++i) {
        const Blob& b = scene.blobs[i];
        out += i ? ",\n    {" : "\n    {";
        out += "\"x\": ";
        vector(out, {b.x[0], b.x[1]});
        out += ", \"s\": ";
        number(out, b.s);
        out += ", \"a\": ";
        number(out, b.a);
        out += ", \"theta\": ";
        number(out, b.theta);
        out += ", \"phi\": ";
        vector(out, b.phi);
        out += ", \"psi\": ";
        vector(out, b.psi);
        if (b.psi_border) {
            out += ", \"psi_border\": ";
            vector(out, *b.psi_border);
        }
        out += '}';
    }
    out += scene.blobs.empty() ? "],\n" : "\n  ],\n";
    out += "  \"background\": {\"phi0\": ";
    vector(out, scene.phi_bg);
    out += ", \"psi0\": ";
    vector(out, scene.psi_bg);
    out += "}\n}\n";
    return out;
}

nlohmann::json scene_to_json(const BlobScene& scene) { return json::parse(encode_scene(scene)); }

BlobScene scene_from_json(const nlohmann::json& j, const std::string& path) {
    const json& version = member(j, "version", path);
    if (!version.is_number_integer() || version.get<int>() != kSceneDocumentVersion) {
        throw FormatError(path + ".version", "unsupported scene document version");
    }
    BlobScene scene;
    scene.c = get_float(member(j, "c", path), path + ".c");
    const json& blobs = member(j, "blobs", path);
    if (!blobs.is_array()) throw FormatError(path + ".blobs", "expected an array");
    const json& k = member(j, "k", path);
    if (!k.is_number_integer() || k.get<std::int64_t>() != static_cast<std::int64_t>(blobs.size())) {
        throw FormatError(path + ".k", "does not match the number of blobs");
    }
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const std::string bp = path + ".blobs[" + std::to_string(i) + "]";
        const json& bj = blobs[i];
        Blob b;
        auto x = get_vector(member(bj, "x", bp), bp + ".x");
        if (x.size() != 2) throw FormatError(bp + ".x", "expected two coordinates");
        b.x = {x[0], x[1]};
        b.s = get_float(member(bj, "s", bp), bp + ".s");
        b.a = get_float(member(bj, "a", bp), bp + ".a");
        b.theta = get_float(member(bj, "theta", bp), bp + ".theta");
        b.phi = get_vector(member(bj, "phi", bp), bp + ".phi");
        b.psi = get_vector(member(bj, "psi", bp), bp + ".psi");
        if (auto it = bj.find("psi_border"); it != bj.end()) b.psi_border = get_vector(*it, bp + ".psi_border");
        scene.blobs.push_back(std::move(b));
    }
    const json& bg = member(j, "background", path);
    scene.phi_bg = get_vector(member(bg, "phi0", path + ".background"), path + ".background.phi0");
    scene.psi_bg = get_vector(member(bg, "psi0", path + ".background"), path + ".background.psi0");
    for (std::size_t i = 0; i < scene.blobs.size(); ++i) {
        const std::string bp = path + ".blobs[" + std::to_string(i) + "]";
        const Blob& b = scene.blobs[i];
        if (b.phi.size() != scene.d_in()) throw FormatError(bp + ".phi", "length differs from background.phi0");
        if (b.psi.size() != scene.d_style()) throw FormatError(bp + ".psi", "length differs from background.psi0");
        if (b.psi_border && b.psi_border->size() != scene.d_style()) {
            throw FormatError(bp + ".psi_border", "length differs from background.psi0");
        }
        if (!(b.a > 0.0f)) throw FormatError(bp + ".a", "aspect ratio must be positive");
    }
    try {
        validate_scene(scene);
    } catch (const DomainError& e) {
        throw FormatError(path, e.what());
    }
    return scene;
}

BlobScene decode_scene(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("scene", e.what());
    }
    return scene_from_json(j);
}

void save_scene(const BlobScene& scene, const std::filesystem::path& path) { write_file(path, encode_scene(scene)); }

BlobScene load_scene(const std::filesystem::path& path) { return decode_scene(read_file(path)); }

}  // namespace blobgan::io
