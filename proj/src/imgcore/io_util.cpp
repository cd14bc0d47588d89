#include "dsatlas/io_util.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dsatlas/error.hpp"

namespace dsatlas {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const auto n = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    if (n > 0) f.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!f) throw Error("read failed: " + path);
    return bytes;
}

void atomic_write_file(const std::string& path, const void* data, std::size_t n) {
    const std::string tmp = path + ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open file for writing: " + tmp);
        if (n > 0) f.write(static_cast<const char*>(data), std::streamsize(n));
        if (!f) throw Error("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("rename failed for " + path + ": " + ec.message());
    }
}

void atomic_write_file(const std::string& path, const std::string& text) {
    atomic_write_file(path, text.data(), text.size());
}

void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    atomic_write_file(path, bytes.data(), bytes.size());
}

void write_raw_f32(const std::string& path, const std::vector<float>& values) {
    static_assert(sizeof(float) == 4);
    atomic_write_file(path, values.data(), values.size() * 4);
}

std::vector<float> read_raw_f32(const std::string& path, std::size_t expected_count) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() != expected_count * 4)
        throw Error("raw f32 file has wrong size: " + path);
    std::vector<float> values(expected_count);
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

}  // namespace dsatlas
