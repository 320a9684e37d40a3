#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "fieldmap/util.hpp"

namespace fieldmap {

// Portable on-disk matrix format: a directory holding header.json
// (dimensions plus caller metadata) and data.bin (row-major IEEE-754
// 32-bit little-endian values). Every persisted matrix in the pipeline
// uses this layout so artifacts stay bit-exact across implementations.

namespace detail {
inline bool host_is_little_endian() {
    const uint32_t probe = 1;
    uint8_t byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}
}  // namespace detail

inline void save_matrix(const std::filesystem::path& dir, const std::vector<size_t>& shape,
                        const std::vector<float>& data,
                        const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
    size_t expect = 1;
    for (size_t d : shape) expect *= d;
    if (expect != data.size())
        throw pipeline_error("save_matrix: shape does not match data size");

    std::filesystem::create_directories(dir);
    nlohmann::ordered_json header;
    header["dtype"] = "float32";
    header["order"] = "row-major";
    header["endianness"] = "little";
    header["shape"] = shape;
    for (auto& [key, value] : extra.items()) header[key] = value;
    write_text_file(dir / "header.json", header.dump(2) + "\n");

    std::ofstream out(dir / "data.bin", std::ios::binary);
    if (!out) throw pipeline_error("cannot write " + (dir / "data.bin").string());
    if (detail::host_is_little_endian()) {
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
    } else {
        for (float v : data) {
            uint8_t bytes[4];
            std::memcpy(bytes, &v, 4);
            std::swap(bytes[0], bytes[3]);
            std::swap(bytes[1], bytes[2]);
            out.write(reinterpret_cast<const char*>(bytes), 4);
        }
    }
    if (!out) throw pipeline_error("write failed: " + (dir / "data.bin").string());
}

struct LoadedMatrix {
    std::vector<size_t> shape;
    std::vector<float> data;
    nlohmann::json header;
};

inline LoadedMatrix load_matrix(const std::filesystem::path& dir) {
    LoadedMatrix m;
    m.header = nlohmann::json::parse(read_text_file(dir / "header.json"));
    if (m.header.value("dtype", "") != "float32")
        throw config_error("load_matrix: unsupported dtype in " + dir.string());
    m.shape = m.header.at("shape").get<std::vector<size_t>>();
    size_t count = 1;
    for (size_t d : m.shape) count *= d;

    std::ifstream in(dir / "data.bin", std::ios::binary);
    if (!in) throw config_error("cannot open " + (dir / "data.bin").string());
    m.data.resize(count);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(float))
        throw config_error("data.bin truncated: " + dir.string());
    if (!detail::host_is_little_endian()) {
        for (float& v : m.data) {
            uint8_t bytes[4];
            std::memcpy(bytes, &v, 4);
            std::swap(bytes[0], bytes[3]);
            std::swap(bytes[1], bytes[2]);
            std::memcpy(&v, bytes, 4);
        }
    }
    return m;
}

}  // namespace fieldmap
