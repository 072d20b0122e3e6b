#include "stroketok/checkpoint.hpp"

#include <algorithm>

#include "stroketok/binary_io.hpp"
#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"

namespace stroketok {
namespace {
constexpr std::string_view kMagic = "STKT";
}

void Checkpoint::set(std::string key, std::string value) {
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  metadata.emplace_back(std::move(key), std::move(value));
}

bool Checkpoint::has(std::string_view key) const {
  return std::any_of(metadata.begin(), metadata.end(), [&](const auto& kv) { return kv.first == key; });
}

const std::string& Checkpoint::get(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  throw Error(ErrorKind::BadFormat, "checkpoint lacks metadata key '" + std::string(key) + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  binary::Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.string(k);
    w.string(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.string(t.name);
    w.u32(t.frozen ? 1u : 0u);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.u64(d);
    for (double v : t.values) w.f64(v);
  }
  return w.str();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  binary::Reader r(bytes);
  if (bytes.size() < 4 || r.bytes(4) != kMagic) throw Error(ErrorKind::BadFormat, "not a checkpoint (missing STKT magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::BadFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.string();
    std::string v = r.string();
    ckpt.metadata.emplace_back(std::move(k), std::move(v));
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Checkpoint::Entry e;
    e.name = r.string();
    e.frozen = (r.u32() & 1u) != 0;
    const std::uint32_t rank = r.u32();
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      e.shape.push_back(static_cast<std::size_t>(r.u64()));
      count *= e.shape.back();
    }
    if (count > bytes.size() / 8) throw Error(ErrorKind::BadFormat, "tensor '" + e.name + "' larger than file");
    e.values.resize(count);
    for (double& v : e.values) v = r.f64();
    ckpt.tensors.push_back(std::move(e));
  }
  if (!r.done()) throw Error(ErrorKind::BadFormat, "trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

void capture_parameters(const tensor::ParameterStore& store, Checkpoint& ckpt) {
  for (const auto& name : store.names()) {
    const auto& t = store.get(name);
    ckpt.tensors.push_back({name, store.frozen(name), t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
}

void restore_parameters(const Checkpoint& ckpt, tensor::ParameterStore& store) {
  for (const auto& name : store.names()) {
    auto it = std::find_if(ckpt.tensors.begin(), ckpt.tensors.end(), [&](const auto& e) { return e.name == name; });
    if (it == ckpt.tensors.end()) throw Error(ErrorKind::BadFormat, "checkpoint lacks tensor '" + name + "'");
    auto& t = store.get(name);
    if (it->shape != t.shape()) {
      throw Error(ErrorKind::BadFormat, "tensor '" + name + "' has shape " + tensor::shape_string(it->shape) +
                                            ", expected " + tensor::shape_string(t.shape()));
    }
    std::copy(it->values.begin(), it->values.end(), t.mutable_data().begin());
  }
}

}  // namespace stroketok
