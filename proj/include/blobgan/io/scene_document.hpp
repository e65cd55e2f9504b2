#pragma once

// Text (JSON) encoding of a BlobScene. Numbers are written with nine
// significant digits, which round-trips every float exactly.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "blobgan/blob.hpp"

namespace blobgan::io {

inline constexpr int kSceneDocumentVersion = 1;

std::string encode_scene(const BlobScene& scene);
// Throws FormatError whose section is the JSON path of the offending field,
// e.g. "scene.blobs[2].phi".
BlobScene decode_scene(const std::string& text);
BlobScene scene_from_json(const nlohmann::json& j, const std::string& path = "scene");
nlohmann::json scene_to_json(const BlobScene& scene);

void save_scene(const BlobScene& scene, const std::filesystem::path& path);
BlobScene load_scene(const std::filesystem::path& path);

}  // namespace blobgan::io
