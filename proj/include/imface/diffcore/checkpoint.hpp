#pragma once

#include "imface/diffcore/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace imface::diff {

inline constexpr char kCheckpointMagic[6] = {'I', 'M', 'F', 'P', 'P', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Binary layout, little-endian:
///   magic "IMFPP\0" | u32 version | u64 tensor count |
///   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 payload
std::vector<std::uint8_t> encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(const std::vector<std::uint8_t>& bytes);

void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
/// Throws Error(io) on truncation or a bad header; never returns partial data.
NamedTensors read_tensors(const std::filesystem::path& path);

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace imface::diff
