#pragma once

// 8-bit image ingest/export: PNG (gray or RGB) and binary PGM/PPM (P5/P6).
// Pixels are quantized with round-half-away-from-zero and clamped to [0, 255].

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "specdiff/error.hpp"
#include "specdiff/image.hpp"

namespace specdiff {

struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
};

namespace detail {

inline bool has_png_signature(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

struct PnmHeader {
    char kind = 0;  // '5' gray, '6' rgb
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t data_offset = 0;
};

inline PnmHeader parse_pnm_header(std::istream& in, const std::string& name) {
    PnmHeader h;
    char magic[2] = {};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw ImageIoError(name + ": not a binary PGM/PPM or PNG file");
    h.kind = magic[1];
    std::size_t fields[3] = {};
    for (std::size_t& f : fields) {
        int ch = in.get();
        for (;;) {
            if (ch == '#') {
                while (ch != '\n' && ch != EOF) ch = in.get();
            } else if (std::isspace(ch)) {
                ch = in.get();
            } else {
                break;
            }
        }
        if (!std::isdigit(ch)) throw ImageIoError(name + ": malformed PNM header");
        std::size_t v = 0;
        while (std::isdigit(ch)) {
            v = v * 10 + static_cast<std::size_t>(ch - '0');
            ch = in.get();
        }
        f = v;
        if (&f == &fields[2] && !std::isspace(ch)) throw ImageIoError(name + ": malformed PNM header");
    }
    h.width = fields[0];
    h.height = fields[1];
    if (fields[2] != 255) throw ImageIoError(name + ": only 8-bit (maxval 255) PNM is supported");
    if (h.width == 0 || h.height == 0) throw ImageIoError(name + ": zero image dimension");
    h.data_offset = static_cast<std::size_t>(in.tellg());
    return h;
}

}  // namespace detail

/// Reads only the header to report dimensions.
inline ImageShape probe_image(const std::filesystem::path& path) {
    const std::string name = path.string();
    if (!std::filesystem::exists(path)) throw ImageIoError(name + ": file not found");
    if (detail::has_png_signature(path)) {
        png_image img;
        std::memset(&img, 0, sizeof img);
        img.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_file(&img, name.c_str()))
            throw ImageIoError(name + ": " + img.message);
        ImageShape s{img.height, img.width, (img.format & PNG_FORMAT_FLAG_COLOR) ? 3u : 1u};
        png_image_free(&img);
        return s;
    }
    std::ifstream in(path, std::ios::binary);
    const auto h = detail::parse_pnm_header(in, name);
    return {h.height, h.width, h.kind == '6' ? 3u : 1u};
}

/// Decodes a PNG (gray, gray+alpha, RGB or RGBA; alpha is dropped) or P5/P6 file.
inline ImageGrid read_image(const std::filesystem::path& path) {
    const std::string name = path.string();
    if (!std::filesystem::exists(path)) throw ImageIoError(name + ": file not found");
    std::vector<unsigned char> bytes;
    std::size_t h = 0, w = 0, c = 0;
    if (detail::has_png_signature(path)) {
        png_image img;
        std::memset(&img, 0, sizeof img);
        img.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_file(&img, name.c_str()))
            throw ImageIoError(name + ": " + img.message);
        const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
        img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
        bytes.resize(PNG_IMAGE_SIZE(img));
        if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
            const std::string msg = img.message;
            png_image_free(&img);
            throw ImageIoError(name + ": " + msg);
        }
        h = img.height;
        w = img.width;
        c = color ? 3 : 1;
    } else {
        std::ifstream in(path, std::ios::binary);
        const auto hdr = detail::parse_pnm_header(in, name);
        h = hdr.height;
        w = hdr.width;
        c = hdr.kind == '6' ? 3 : 1;
        bytes.resize(h * w * c);
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (static_cast<std::size_t>(in.gcount()) != bytes.size())
            throw ImageIoError(name + ": truncated PNM pixel data");
    }
    std::vector<double> data(bytes.begin(), bytes.end());
    return ImageGrid(h, w, c, std::move(data));
}

inline std::vector<unsigned char> quantize(const ImageGrid& img) {
    std::vector<unsigned char> out(img.size());
    std::transform(img.data().begin(), img.data().end(), out.begin(), quantize_u8);
    return out;
}

inline void write_png(const std::filesystem::path& path, const ImageGrid& img) {
    const std::string name = path.string();
    const auto bytes = quantize(img);
    png_image out;
    std::memset(&out, 0, sizeof out);
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(img.width());
    out.height = static_cast<png_uint_32>(img.height());
    out.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&out, name.c_str(), 0, bytes.data(), 0, nullptr)) {
        const std::string msg = out.message;
        png_image_free(&out);
        throw ImageIoError(name + ": " + msg);
    }
}

inline void write_pnm(const std::filesystem::path& path, const ImageGrid& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(path.string() + ": cannot open for writing");
    out << (img.channels() == 3 ? "P6" : "P5") << '\n'
        << img.width() << ' ' << img.height() << '\n'
        << 255 << '\n';
    const auto bytes = quantize(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ImageIoError(path.string() + ": write failed");
}

/// Picks the encoder from the extension: .pgm/.ppm/.pnm -> PNM, anything else PNG.
inline void write_image(const std::filesystem::path& path, const ImageGrid& img) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
        write_pnm(path, img);
    else
        write_png(path, img);
}

}  // namespace specdiff
