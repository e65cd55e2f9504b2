#pragma once

// PNG and base64 helpers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blobgan/tensor.hpp"

namespace blobgan::io {

// [3,H,W] in [-1,1] -> 8-bit RGB, (v+1)*127.5 rounded half away from zero.
std::string encode_png_rgb(const Tensor& image);
// [H,W] in [0,1] -> 8-bit grayscale, v*255 rounded half away from zero.
std::string encode_png_gray(const Tensor& map);
// Any PNG -> [3,H,W] in [-1,1] (v/127.5 - 1). Throws FormatError("png", ...).
Tensor decode_png_rgb(const std::string& bytes);

std::uint8_t to_byte(float v);

std::string base64_encode(const std::string& bytes);
// Throws FormatError("base64", ...) on invalid input.
std::string base64_decode(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace blobgan::io
