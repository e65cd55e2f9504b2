#include "blobgan/io/commands.hpp"

#include <cmath>
#include <set>

#include "blobgan/errors.hpp"

namespace blobgan::io {
namespace {

using nlohmann::json;

const json& need(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(path + "." + key, "missing");
    return *it;
}

float number(const json& j, const std::string& path) {
    if (!j.is_number()) throw FormatError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw FormatError(path, "non-finite number");
    return static_cast<float>(v);
}

std::size_t index(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw FormatError(path, "expected a non-negative integer");
    return static_cast<std::size_t>(j.get<std::int64_t>());
}

std::vector<float> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw FormatError(path, "expected an array");
    std::vector<float> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::array<float, 2> pair(const json& j, const std::string& path) {
    auto v = numbers(j, path);
    if (v.size() != 2) throw FormatError(path, "expected two numbers");
    return {v[0], v[1]};
}

void only_keys(const json& j, const std::string& path, std::set<std::string> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) throw FormatError(path + "." + it.key(), "unexpected field");
    }
}

}  // namespace

EditCommand edit_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw FormatError(path, "expected an object");
    const json& kind = need(j, "kind", path);
    if (!kind.is_string()) throw FormatError(path + ".kind", "expected a string");
    auto k = parse_edit_kind(kind.get<std::string>());
    if (!k) throw FormatError(path + ".kind", "unknown edit kind '" + kind.get<std::string>() + "'");
    EditCommand cmd;
    cmd.kind = *k;
    cmd.target = index(need(j, "target", path), path + ".target");
    switch (cmd.kind) {
        case EditKind::kMove:
            only_keys(j, path, {"kind", "target", "dx"});
            cmd.dx = pair(need(j, "dx", path), path + ".dx");
            break;
        case EditKind::kRemove:
            only_keys(j, path, {"kind", "target", "s"});
            if (j.contains("s")) cmd.s = number(j["s"], path + ".s");
            break;
        case EditKind::kResize:
            only_keys(j, path, {"kind", "target", "ds"});
            cmd.ds = number(need(j, "ds", path), path + ".ds");
            break;
        case EditKind::kRotate:
            only_keys(j, path, {"kind", "target", "dtheta"});
            cmd.dtheta = number(need(j, "dtheta", path), path + ".dtheta");
            break;
        case EditKind::kClone:
            only_keys(j, path, {"kind", "target", "new_x", "insert_at"});
            cmd.new_x = pair(need(j, "new_x", path), path + ".new_x");
            if (j.contains("insert_at")) cmd.insert_at = index(j["insert_at"], path + ".insert_at");
            break;
        case EditKind::kRestyle:
            only_keys(j, path, {"kind", "target", "psi", "psi_bg"});
            cmd.psi = numbers(need(j, "psi", path), path + ".psi");
            if (j.contains("psi_bg")) cmd.psi_bg = numbers(j["psi_bg"], path + ".psi_bg");
            break;
        case EditKind::kRestructure:
            only_keys(j, path, {"kind", "target", "phi"});
            cmd.phi = numbers(need(j, "phi", path), path + ".phi");
            break;
    }
    return cmd;
}

std::vector<EditCommand> edits_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw FormatError(path, "expected an array");
    std::vector<EditCommand> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(edit_from_json(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json edit_to_json(const EditCommand& cmd) {
    json j = {{"kind", std::string(edit_kind_name(cmd.kind))}, {"target", cmd.target}};
    switch (cmd.kind) {
        case EditKind::kMove: j["dx"] = cmd.dx; break;
        case EditKind::kRemove: j["s"] = cmd.s; break;
        case EditKind::kResize: j["ds"] = cmd.ds; break;
        case EditKind::kRotate: j["dtheta"] = cmd.dtheta; break;
        case EditKind::kClone:
            j["new_x"] = cmd.new_x;
            if (cmd.insert_at) j["insert_at"] = *cmd.insert_at;
            break;
        case EditKind::kRestyle:
            j["psi"] = cmd.psi;
            if (!cmd.psi_bg.empty()) j["psi_bg"] = cmd.psi_bg;
            break;
        case EditKind::kRestructure: j["phi"] = cmd.phi; break;
    }
    return j;
}

Constraint constraint_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw FormatError(path, "expected an object");
    only_keys(j, path, {"index", "attribute", "value"});
    Constraint c;
    c.index = index(need(j, "index", path), path + ".index");
    const json& attr = need(j, "attribute", path);
    if (!attr.is_string()) throw FormatError(path + ".attribute", "expected a string");
    auto a = parse_attribute(attr.get<std::string>());
    if (!a) throw FormatError(path + ".attribute", "unknown attribute '" + attr.get<std::string>() + "'");
    c.attribute = *a;
    const json& value = need(j, "value", path);
    c.value = value.is_array() ? numbers(value, path + ".value") : std::vector<float>{number(value, path + ".value")};
    return c;
}

ConstraintSet constraints_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw FormatError(path, "expected an array");
    ConstraintSet out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(constraint_from_json(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

json constraint_to_json(const Constraint& c) {
    return {{"index", c.index}, {"attribute", std::string(attribute_name(c.attribute))}, {"value", c.value}};
}

}  // namespace blobgan::io
