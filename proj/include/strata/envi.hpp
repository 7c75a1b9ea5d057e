#pragma once

// ENVI-style cube storage: a text header (`name.hdr`) plus a raw
// little-endian float32 band-sequential payload (`name.raw`).
//
//   ENVI
//   samples = <cols>
//   lines = <rows>
//   bands = <bands>
//   header offset = 0
//   data type = 4
//   interleave = bsq
//   byte order = 0
//   wavelength units = Nanometers
//   wavelength = { 400.5, 402.9, ... }
//
// Feature stacks use the same layout with a `band names = { ... }` entry.

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/cube.hpp"

namespace strata {

struct EnviError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace envi_detail {

inline std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

/// Parses `key = value` pairs; braced values may span several lines.
inline std::map<std::string, std::string> parse_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line).rfind("ENVI", 0) != 0)
        throw EnviError("header does not start with ENVI");
    std::map<std::string, std::string> fields;
    while (std::getline(in, line)) {
        if (trim(line).empty() || trim(line)[0] == ';') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw EnviError("malformed header line: " + line);
        std::string key = lower(trim(line.substr(0, eq)));
        std::string value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '{') {
            while (value.find('}') == std::string::npos) {
                std::string more;
                if (!std::getline(in, more)) throw EnviError("unterminated brace in key " + key);
                value += ' ' + trim(more);
            }
            value = trim(value.substr(1, value.find('}') - 1));
        }
        fields[key] = value;
    }
    return fields;
}

inline std::size_t parse_size(const std::map<std::string, std::string>& fields,
                              const std::string& key) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw EnviError("header missing required key '" + key + "'");
    std::size_t value = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw EnviError("header key '" + key + "' is not a non-negative integer: " + s);
    return value;
}

inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        double v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw EnviError("bad numeric list entry: " + item);
        out.push_back(v);
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace envi_detail

/// Raw payload path for a header path: same basename, `.raw` extension.
inline std::filesystem::path raw_path_for(const std::filesystem::path& header_path) {
    auto raw = header_path;
    raw.replace_extension(".raw");
    return raw;
}

inline HsiCube load_cube(const std::filesystem::path& header_path) {
    using namespace envi_detail;
    std::ifstream hdr(header_path);
    if (!hdr) throw EnviError("cannot open header " + header_path.string());
    const auto fields = parse_header(hdr);

    const std::size_t cols = parse_size(fields, "samples");
    const std::size_t rows = parse_size(fields, "lines");
    const std::size_t bands = parse_size(fields, "bands");
    if (rows == 0 || cols == 0 || bands == 0) throw EnviError("header declares an empty cube");
    if (parse_size(fields, "data type") != 4)
        throw EnviError("unsupported data type (only 4 = float32 is supported)");
    std::size_t offset = 0;
    if (fields.count("header offset")) offset = parse_size(fields, "header offset");
    if (auto it = fields.find("interleave"); it != fields.end() && lower(it->second) != "bsq")
        throw EnviError("unsupported interleave '" + it->second + "' (only bsq)");
    std::size_t byte_order = 0;
    if (fields.count("byte order")) byte_order = parse_size(fields, "byte order");
    if (byte_order > 1) throw EnviError("invalid byte order");

    std::vector<double> wavelengths;
    if (auto it = fields.find("wavelength"); it != fields.end()) {
        wavelengths = parse_list(it->second);
        if (wavelengths.size() != bands)
            throw EnviError("wavelength list has " + std::to_string(wavelengths.size()) +
                            " entries for " + std::to_string(bands) + " bands");
    }

    const auto raw = raw_path_for(header_path);
    std::error_code ec;
    const auto file_size = std::filesystem::file_size(raw, ec);
    if (ec) throw EnviError("cannot stat raw file " + raw.string());
    const std::size_t count = rows * cols * bands;
    if (file_size != offset + count * sizeof(float))
        throw EnviError("raw file " + raw.string() + " holds " + std::to_string(file_size) +
                        " bytes; header implies " + std::to_string(offset + count * sizeof(float)));

    std::vector<float> data(count);
    std::ifstream in(raw, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw EnviError("short read from " + raw.string());

    const bool file_big = byte_order == 1;
    const bool host_big = std::endian::native == std::endian::big;
    if (file_big != host_big) {
        for (auto& v : data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            bits = byteswap32(bits);
            std::memcpy(&v, &bits, 4);
        }
    }
    try {
        return HsiCube(rows, cols, bands, std::move(data), std::move(wavelengths));
    } catch (const std::invalid_argument& e) {
        throw EnviError(std::string("invalid cube in header: ") + e.what());
    }
}

/// Writes `header_path` and its `.raw` companion; load_cube reproduces the
/// cube bit-exactly.
inline void save_cube(const HsiCube& cube, const std::filesystem::path& header_path) {
    using namespace envi_detail;
    if (header_path.has_parent_path()) std::filesystem::create_directories(header_path.parent_path());
    {
        std::ofstream hdr(header_path);
        if (!hdr) throw EnviError("cannot write header " + header_path.string());
        hdr << "ENVI\n"
            << "samples = " << cube.cols() << "\n"
            << "lines = " << cube.rows() << "\n"
            << "bands = " << cube.bands() << "\n"
            << "header offset = 0\n"
            << "data type = 4\n"
            << "interleave = bsq\n"
            << "byte order = 0\n";
        if (cube.has_wavelengths()) {
            hdr << "wavelength units = Nanometers\n"
                << "wavelength = {";
            const auto& wl = cube.wavelengths();
            for (std::size_t i = 0; i < wl.size(); ++i)
                hdr << (i ? ", " : " ") << format_double(wl[i]);
            hdr << " }\n";
        }
        if (!hdr) throw EnviError("failed writing header " + header_path.string());
    }
    const auto raw = raw_path_for(header_path);
    std::ofstream out(raw, std::ios::binary | std::ios::trunc);
    if (!out) throw EnviError("cannot write raw file " + raw.string());
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(cube.data().data()),
                  static_cast<std::streamsize>(cube.data().size() * sizeof(float)));
    } else {
        for (float v : cube.data()) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            bits = byteswap32(bits);
            out.write(reinterpret_cast<const char*>(&bits), 4);
        }
    }
    if (!out) throw EnviError("failed writing raw file " + raw.string());
}

/// Feature stack as a cube plus a `band names` header entry.
inline void save_features(const FeatureStack& stack, const std::filesystem::path& header_path) {
    for (const auto& name : stack.names())
        if (name.find_first_of(",{}\n") != std::string::npos)
            throw EnviError("feature name '" + name + "' cannot be stored in an ENVI header");
    save_cube(to_cube(stack), header_path);
    std::ofstream hdr(header_path, std::ios::app);
    hdr << "band names = {";
    for (std::size_t i = 0; i < stack.names().size(); ++i) hdr << (i ? ", " : " ") << stack.names()[i];
    hdr << " }\n";
    if (!hdr) throw EnviError("failed writing header " + header_path.string());
}

/// Loads a stack; without `band names` the channels are named f1, f2, ...
inline FeatureStack load_features(const std::filesystem::path& header_path) {
    using namespace envi_detail;
    const HsiCube cube = load_cube(header_path);
    std::ifstream hdr(header_path);
    const auto fields = parse_header(hdr);
    std::vector<std::string> names;
    if (auto it = fields.find("band names"); it != fields.end()) {
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(trim(item));
        if (names.size() != cube.bands())
            throw EnviError("band names list has " + std::to_string(names.size()) + " entries for " +
                            std::to_string(cube.bands()) + " bands");
    }
    return FeatureStack(cube.rows(), cube.cols(), cube.bands(), cube.data(), std::move(names));
}

}  // namespace strata
