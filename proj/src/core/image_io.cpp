#include "avgaudit/core/image_io.hpp"

#include "avgaudit/core/error.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace avgaudit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    return FilePtr(std::fopen(path.c_str(), mode));
}

// libpng reports errors through longjmp; route them into a message buffer.
void png_error_handler(png_structp png, png_const_charp msg) {
    auto* buffer = static_cast<std::string*>(png_get_error_ptr(png));
    if (buffer) *buffer = msg;
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void write_u32le(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    os.write(b.data(), 4);
}

std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

} // namespace

Image load_image(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    if (!file) throw DecodeError("cannot open '" + path.string() + "'");

    std::array<unsigned char, 8> sig{};
    if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() || png_sig_cmp(sig.data(), 0, 8) != 0)
        throw DecodeError("'" + path.string() + "' is not a PNG file");

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler,
                                             png_warning_handler);
    if (!png) throw DecodeError("libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("libpng initialization failed");
    }

    // Everything the longjmp can skip over must be trivially destructible or
    // declared before setjmp.
    std::vector<unsigned char> raw;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("failed to decode '" + path.string() + "': " + message);
    }

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    int channels = 0;
    if (color_type == PNG_COLOR_TYPE_GRAY) channels = 1;
    else if (color_type == PNG_COLOR_TYPE_RGB) channels = 3;
    if (channels == 0 || (bit_depth != 8 && bit_depth != 16)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("'" + path.string() + "': unsupported PNG (color type " + std::to_string(color_type) +
                          ", bit depth " + std::to_string(bit_depth) + "); need 8/16-bit gray or RGB");
    }
    if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels);
    std::vector<double> px(n);
    if (bit_depth == 8) {
        for (std::size_t i = 0; i < n; ++i) px[i] = raw[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint16_t v;
            std::memcpy(&v, raw.data() + 2 * i, 2);
            px[i] = static_cast<double>(v) * (255.0 / 65535.0);
        }
    }
    return Image(static_cast<int>(height), static_cast<int>(width), channels, std::move(px));
}

std::size_t save_png(const Image& image, const std::filesystem::path& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw DataError("PNG export supports 8 or 16 bits");
    if (image.channels() != 1 && image.channels() != 3) throw DataError("PNG export needs 1 or 3 channels");
    const int h = image.height(), w = image.width(), c = image.channels();
    const std::size_t n = image.size();
    const int bytes_per_sample = bit_depth / 8;
    std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes_per_sample));
    std::size_t clipped = 0;
    const auto px = image.pixels();
    for (std::size_t i = 0; i < n; ++i) {
        double v = px[i];
        if (v < 0.0 || v > 255.0) {
            ++clipped;
            v = std::clamp(v, 0.0, 255.0);
        }
        if (bit_depth == 8) {
            raw[i] = static_cast<unsigned char>(std::lround(v));
        } else {
            const auto q = static_cast<std::uint16_t>(std::lround(v * (65535.0 / 255.0)));
            raw[2 * i] = static_cast<unsigned char>(q >> 8);  // PNG is big-endian
            raw[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
        }
    }

    FilePtr file = open_file(path, "wb");
    if (!file) throw DataError("cannot write '" + path.string() + "'");

    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler,
                                              png_warning_handler);
    if (!png) throw DataError("libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng initialization failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode '" + path.string() + "': " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                 c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t row_bytes = static_cast<std::size_t>(w) * c * bytes_per_sample;
    for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = raw.data() + r * row_bytes;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return clipped;
}

void save_float_raster(const Image& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write("AVGI", 4);
    write_u32le(out, static_cast<std::uint32_t>(image.height()));
    write_u32le(out, static_cast<std::uint32_t>(image.width()));
    write_u32le(out, static_cast<std::uint32_t>(image.channels()));
    for (double v : image.pixels()) write_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Image load_float_raster(const std::filesystem::path& path) {
    const auto bytes = read_all(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "AVGI", 4) != 0)
        throw FormatError("'" + path.string() + "': missing AVGI magic");
    const std::uint32_t h = read_u32le(&bytes[4]);
    const std::uint32_t w = read_u32le(&bytes[8]);
    const std::uint32_t c = read_u32le(&bytes[12]);
    if (h == 0 || w == 0 || c == 0)
        throw FormatError("'" + path.string() + "': invalid AVGI header");
    const std::size_t n = static_cast<std::size_t>(h) * w * c;
    if (bytes.size() != 16 + 4 * n)
        throw FormatError("'" + path.string() + "': payload holds " + std::to_string(bytes.size() - 16) +
                          " bytes, expected " + std::to_string(4 * n));
    std::vector<double> px(n);
    for (std::size_t i = 0; i < n; ++i) px[i] = std::bit_cast<float>(read_u32le(&bytes[16 + 4 * i]));
    try {
        return Image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(px));
    } catch (const DataError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

Image load_any(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DecodeError("cannot open '" + path.string() + "'");
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (in.gcount() == 4 && std::memcmp(magic.data(), "AVGI", 4) == 0) return load_float_raster(path);
    return load_image(path);
}

} // namespace avgaudit
