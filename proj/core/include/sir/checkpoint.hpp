#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sir/shape_model.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Versioned binary container shared by network checkpoints and shape-model
// files. Layout (all integers and floats little-endian, see docs/FORMATS.md):
//   magic "SIRBIN01" | u32 version | u32 payloadKind | u64 metaLen |
//   meta JSON bytes | u64 tensorCount | tensors
// each tensor: u32 nameLen | name | u32 rank | u64 dims[rank] | f64 data[n].
inline constexpr char kContainerMagic[8] = {'S', 'I', 'R', 'B', 'I', 'N', '0', '1'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class PayloadKind : std::uint32_t {
  NetworkCheckpoint = 1,
  ShapeModel = 2,
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct BinaryContainer {
  PayloadKind kind = PayloadKind::NetworkCheckpoint;
  std::string metaJson;  // free-form JSON manifest describing the payload
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const BinaryContainer& container);
BinaryContainer read_container(const std::filesystem::path& path);

void save_shape_model(const std::filesystem::path& path, const ShapeModel& model);
ShapeModel load_shape_model(const std::filesystem::path& path);

}  // namespace sir
