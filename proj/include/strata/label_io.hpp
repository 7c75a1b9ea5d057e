#pragma once

// Label maps on disk.
//  - PGM (P5, 8-bit): the exact label codes; the interchange format.
//  - PNG (RGB): palette rendering for viewing. Background is black, codes
//    1/2/3 are red/green/blue.

#include <png.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace strata {

struct LabelMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> codes;  ///< 0 = background
};

using Rgb8 = std::array<std::uint8_t, 3>;

/// Index = label code.
inline std::vector<Rgb8> default_palette() {
    return {Rgb8{0, 0, 0}, Rgb8{255, 0, 0}, Rgb8{0, 255, 0}, Rgb8{0, 0, 255}};
}

inline void write_pgm(const LabelMap& map, const std::filesystem::path& path) {
    if (map.codes.size() != map.rows * map.cols) throw std::invalid_argument("label map size mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << map.cols << " " << map.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(map.codes.data()), static_cast<std::streamsize>(map.codes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline LabelMap read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    auto token = [&] {
        std::string t;
        while (in >> std::ws && in.peek() == '#') std::getline(in, t);
        in >> t;
        return t;
    };
    if (token() != "P5") throw std::runtime_error(path.string() + " is not a binary PGM");
    LabelMap map;
    map.cols = std::stoul(token());
    map.rows = std::stoul(token());
    if (std::stoul(token()) != 255) throw std::runtime_error("only 8-bit PGM label maps are supported");
    in.get();
    map.codes.resize(map.rows * map.cols);
    in.read(reinterpret_cast<char*>(map.codes.data()), static_cast<std::streamsize>(map.codes.size()));
    if (!in) throw std::runtime_error("truncated PGM " + path.string());
    return map;
}

/// Interleaved RGB rendering of a label map.
inline std::vector<std::uint8_t> render_label_map(const LabelMap& map, const std::vector<Rgb8>& palette) {
    if (map.codes.size() != map.rows * map.cols) throw std::invalid_argument("label map size mismatch");
    std::vector<std::uint8_t> rgb(map.codes.size() * 3);
    for (std::size_t i = 0; i < map.codes.size(); ++i) {
        if (map.codes[i] >= palette.size())
            throw std::invalid_argument("label " + std::to_string(map.codes[i]) + " has no palette colour");
        const auto& c = palette[map.codes[i]];
        std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
    return rgb;
}

inline void write_png_rgb(const std::vector<std::uint8_t>& rgb, std::size_t rows, std::size_t cols,
                          const std::filesystem::path& path) {
    if (rgb.size() != rows * cols * 3) throw std::invalid_argument("RGB buffer size mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < rows; ++r)
        png_write_row(png, const_cast<png_bytep>(rgb.data() + r * cols * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_label_png(const LabelMap& map, const std::filesystem::path& path,
                            const std::vector<Rgb8>& palette = default_palette()) {
    write_png_rgb(render_label_map(map, palette), map.rows, map.cols, path);
}

}  // namespace strata
