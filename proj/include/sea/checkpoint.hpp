#pragma once

#include "sea/numerics/params.hpp"
#include "sea/numerics/tensor.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sea {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'A', 'C', 'K', 'P', 'T', '\0'};

/// One raw tensor: dtype "f32" or "f64", little-endian bytes.
struct StoredTensor {
  std::string name;
  std::string dtype;
  Shape shape;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const StoredTensor&, const StoredTensor&) = default;
};

/// Container layout: 8-byte magic, u64 LE header length, JSON header
/// {format_version, kind, config, metrics, tensors: [{name, dtype, shape,
/// offset, nbytes}]}, then the tensor bytes concatenated in header order.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string kind;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<StoredTensor> tensors;

  bool contains(const std::string& name) const;
  const StoredTensor& at(const std::string& name) const;

  template <typename Scalar>
  void put(const std::string& name, const Tensor<Scalar>& t);

  template <typename Scalar>
  void put(const std::string& name, const Vector<Scalar>& v) {
    put(name, Tensor<Scalar>({v.size()}, v));
  }

  /// Reads a tensor, converting between f32 and f64 when needed.
  template <typename Scalar>
  Tensor<Scalar> get(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes,
                                  const std::string& source = "checkpoint");
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores weights and BN running statistics of each layer under "<layer>.<name>".
template <typename Scalar>
void export_layers(Checkpoint& c,
                   const std::vector<std::pair<std::string, LayerParams<Scalar>*>>& layers) {
  for (const auto& [prefix, p] : layers) {
    for (const auto& [name, t] : p->weights()) c.put(prefix + "." + name, t);
    if (p->bn_running_mean.size() > 0) {
      c.put(prefix + ".running_mean", p->bn_running_mean);
      c.put(prefix + ".running_var", p->bn_running_var);
    }
  }
}

/// Loads every tensor of `layers`; shapes must match the existing parameters exactly.
template <typename Scalar>
void import_layers(const Checkpoint& c,
                   const std::vector<std::pair<std::string, LayerParams<Scalar>*>>& layers) {
  auto load = [&](const std::string& key, const Shape& expected) {
    auto t = c.get<Scalar>(key);
    if (t.shape() != expected)
      throw CheckpointError("checkpoint tensor '" + key + "' has shape " +
                            shape_to_string(t.shape()) + ", model expects " +
                            shape_to_string(expected));
    return t;
  };
  for (const auto& [prefix, p] : layers) {
    for (auto& [name, t] : p->weights()) t = load(prefix + "." + name, t.shape());
    if (p->bn_running_mean.size() > 0) {
      const Shape s{p->bn_running_mean.size()};
      p->bn_running_mean = load(prefix + ".running_mean", s).data();
      p->bn_running_var = load(prefix + ".running_var", s).data();
    }
  }
}

}  // namespace sea
