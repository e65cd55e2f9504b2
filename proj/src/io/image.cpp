#include "blobgan/io/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "blobgan/errors.hpp"

namespace blobgan::io {
namespace {

std::string write_png(const std::vector<std::uint8_t>& pixels, std::int64_t height, std::int64_t width,
                      std::uint32_t format) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw DomainError(std::string("png encode: ") + image.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw DomainError(std::string("png encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

}  // namespace

std::uint8_t to_byte(float v) {
    const double scaled = std::round((static_cast<double>(v) + 1.0) * 127.5);
    if (std::isnan(scaled)) return 0;
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

std::string encode_png_rgb(const Tensor& img) {
    if (img.rank() != 3 || img.dim(0) != 3) throw DomainError("encode_png_rgb expects [3,H,W]");
    const std::int64_t h = img.dim(1), w = img.dim(2);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(3 * h * w));
    for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t p = 0; p < h * w; ++p) px[static_cast<std::size_t>(p * 3 + c)] = to_byte(img[c * h * w + p]);
    return write_png(px, h, w, PNG_FORMAT_RGB);
}

std::string encode_png_gray(const Tensor& map) {
    if (map.rank() != 2) throw DomainError("encode_png_gray expects [H,W]");
    std::vector<std::uint8_t> px(static_cast<std::size_t>(map.numel()));
    for (std::int64_t i = 0; i < map.numel(); ++i) {
        const double v = std::round(static_cast<double>(map[i]) * 255.0);
        px[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return write_png(px, map.dim(0), map.dim(1), PNG_FORMAT_GRAY);
}

Tensor decode_png_rgb(const std::string& bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw FormatError("png", image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        png_image_free(&image);
        throw FormatError("png", image.message);
    }
    const std::int64_t h = image.height, w = image.width;
    Tensor out({3, h, w});
    for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t p = 0; p < h * w; ++p) {
            out[c * h * w + p] = static_cast<float>(px[static_cast<std::size_t>(p * 3 + c)] / 127.5 - 1.0);
        }
    return out;
}

std::string base64_encode(const std::string& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw FormatError("base64", "length is not a multiple of 4");
    std::string out(3 * text.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw FormatError("base64", "invalid character");
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("file", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DomainError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DomainError("write failed for " + path.string());
}

}  // namespace blobgan::io
