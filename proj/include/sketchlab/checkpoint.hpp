#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sketchlab/autodiff.hpp"

namespace sketchlab {

// Checkpoint layout (all integers and doubles little-endian):
//   "SKLB" | u32 version | u64 config_len | config bytes (key=value lines)
//   | u64 param_count | per param: u64 name_len, name, u32 ndim, u64 dims[],
//     f64 values in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_bytes(std::ostream& os, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_bytes(std::istream& is, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        int c = is.get();
        if (c == EOF) throw std::runtime_error("checkpoint: truncated file");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

inline void put_f64(std::ostream& os, double d) { put_bytes(os, std::bit_cast<std::uint64_t>(d), 8); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_bytes(is, 8)); }

}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::string& config, const ParamStore& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write("SKLB", 4);
    detail::put_bytes(os, kCheckpointVersion, 4);
    detail::put_bytes(os, config.size(), 8);
    os.write(config.data(), static_cast<std::streamsize>(config.size()));
    detail::put_bytes(os, static_cast<std::uint64_t>(params.count()), 8);
    for (int id = 0; id < params.count(); ++id) {
        const std::string& name = params.name(id);
        const Tensor& t = params.value(id);
        detail::put_bytes(os, name.size(), 8);
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_bytes(os, t.shape.size(), 4);
        for (int d : t.shape) detail::put_bytes(os, static_cast<std::uint64_t>(d), 8);
        for (double x : t.v) detail::put_f64(os, x);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

struct Checkpoint {
    std::string config;
    ParamStore params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string(magic, 4) != "SKLB") throw std::runtime_error("checkpoint: bad magic: " + path);
    std::uint64_t version = detail::get_bytes(is, 4);
    if (version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ck;
    std::uint64_t config_len = detail::get_bytes(is, 8);
    ck.config.resize(config_len);
    is.read(ck.config.data(), static_cast<std::streamsize>(config_len));
    if (static_cast<std::uint64_t>(is.gcount()) != config_len) throw std::runtime_error("checkpoint: truncated config");
    std::uint64_t count = detail::get_bytes(is, 8);
    for (std::uint64_t p = 0; p < count; ++p) {
        std::uint64_t name_len = detail::get_bytes(is, 8);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        if (static_cast<std::uint64_t>(is.gcount()) != name_len) throw std::runtime_error("checkpoint: truncated name");
        std::uint64_t ndim = detail::get_bytes(is, 4);
        std::vector<int> shape;
        for (std::uint64_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(detail::get_bytes(is, 8)));
        Tensor t(shape);
        for (auto& x : t.v) x = detail::get_f64(is);
        ck.params.add(name, std::move(t));
    }
    return ck;
}

// Config echoes are key=value lines; '#' starts a comment line.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        std::size_t eq = line.find('=', start);
        if (eq == std::string::npos) throw std::runtime_error("config: missing '=' in line: " + line);
        std::string key = line.substr(start, eq - start);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            std::size_t a = s.find_first_not_of(" \t");
            std::size_t b = s.find_last_not_of(" \t");
            s = (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);
        if (key.empty()) throw std::runtime_error("config: empty key in line: " + line);
        out[key] = val;
    }
    return out;
}

inline std::string config_get(const std::map<std::string, std::string>& cfg, const std::string& key) {
    auto it = cfg.find(key);
    if (it == cfg.end()) throw std::runtime_error("config: missing key: " + key);
    return it->second;
}

inline int config_get_int(const std::map<std::string, std::string>& cfg, const std::string& key) {
    return std::stoi(config_get(cfg, key));
}

}  // namespace sketchlab
