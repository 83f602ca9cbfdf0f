#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mpat/nn/adam.hpp"
#include "mpat/nn/tensor.hpp"

namespace mpat::nn {

/// Binary checkpoint, all integers and floats little-endian:
///
///   "MPATCKPT" | u32 version | u64 seed | u64 adam step
///   | f64 lr, beta1, beta2, epsilon | str config
///   | u32 tensor count | { str name | u32 rank | u64 dims[rank] | f64 data[...] }*
///
/// where str is u32 byte length followed by the bytes. Optimizer moments are
/// stored as ordinary tensors under "adam.m/<name>" and "adam.v/<name>".
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t seed = 0;
  std::uint64_t adam_step = 0;
  AdamConfig adam;
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mpat::nn
