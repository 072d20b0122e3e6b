#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stroketok/tensor.hpp"

namespace stroketok {

// STKT container: "STKT", u32 version, u32 metadata count, (key, value)
// strings, u32 tensor count, then per tensor: name, u32 flags (bit 0 =
// frozen), u32 rank, u64 dims, float64 payload. Little-endian throughout.
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  struct Entry {
    std::string name;
    bool frozen = false;
    tensor::Shape shape;
    std::vector<double> values;
  };

  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Entry> tensors;

  void set(std::string key, std::string value);
  const std::string& get(std::string_view key) const;  // BadFormat when absent
  bool has(std::string_view key) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters in store order.
void capture_parameters(const tensor::ParameterStore& store, Checkpoint& ckpt);

// Copies stored values into an already-shaped store; every store entry must be present.
void restore_parameters(const Checkpoint& ckpt, tensor::ParameterStore& store);

}  // namespace stroketok
