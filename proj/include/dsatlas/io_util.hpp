#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsatlas {

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

/// write to <path>.tmp-<pid> then rename, so interrupted runs leave no partial file
void atomic_write_file(const std::string& path, const void* data, std::size_t n);
void atomic_write_file(const std::string& path, const std::string& text);
void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

/// little-endian float32 raster (shape goes in a JSON sidecar)
void write_raw_f32(const std::string& path, const std::vector<float>& values);
std::vector<float> read_raw_f32(const std::string& path, std::size_t expected_count);

}  // namespace dsatlas
