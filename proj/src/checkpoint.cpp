#include "sea/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sea {

static_assert(std::endian::native == std::endian::little,
              "checkpoint byte order assumes a little-endian host");

using nlohmann::json;

namespace {

template <typename Scalar>
constexpr const char* dtype_of() {
  return sizeof(Scalar) == 4 ? "f32" : "f64";
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw CheckpointError("unknown dtype '" + dtype + "'");
}

template <typename From, typename To>
Tensor<To> decode(const StoredTensor& s) {
  Tensor<From> t(s.shape);
  std::memcpy(t.ptr(), s.bytes.data(), s.bytes.size());
  if constexpr (std::is_same_v<From, To>)
    return t;
  else
    return t.template cast<To>();
}

}  // namespace

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(tensors.begin(), tensors.end(), [&](const auto& t) { return t.name == name; });
}

const StoredTensor& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

template <typename Scalar>
void Checkpoint::put(const std::string& name, const Tensor<Scalar>& t) {
  if (contains(name)) throw CheckpointError("duplicate checkpoint tensor '" + name + "'");
  StoredTensor s{name, dtype_of<Scalar>(), t.shape(), {}};
  s.bytes.resize(static_cast<std::size_t>(t.size()) * sizeof(Scalar));
  std::memcpy(s.bytes.data(), t.ptr(), s.bytes.size());
  tensors.push_back(std::move(s));
}

template <typename Scalar>
Tensor<Scalar> Checkpoint::get(const std::string& name) const {
  const auto& s = at(name);
  if (s.dtype == "f32") return decode<float, Scalar>(s);
  return decode<double, Scalar>(s);
}

template void Checkpoint::put<float>(const std::string&, const Tensor<float>&);
template void Checkpoint::put<double>(const std::string&, const Tensor<double>&);
template Tensor<float> Checkpoint::get<float>(const std::string&) const;
template Tensor<double> Checkpoint::get<double>(const std::string&) const;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  json header;
  header["format_version"] = c.format_version;
  header["kind"] = c.kind;
  header["config"] = c.config;
  header["metrics"] = c.metrics;
  header["tensors"] = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : c.tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"dtype", t.dtype},
                                 {"shape", t.shape},
                                 {"offset", offset},
                                 {"nbytes", t.bytes.size()}});
    offset += t.bytes.size();
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : c.tensors) out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  auto fail = [&](const std::string& what) { return CheckpointError(source + ": " + what); };
  if (bytes.size() < 16 || !std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic),
                                       bytes.begin()))
    throw fail("not a .seackpt file (bad magic)");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= std::uint64_t(bytes[8 + static_cast<std::size_t>(i)]) << (8 * i);
  if (len > bytes.size() - 16) throw fail("truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  Checkpoint c;
  try {
    c.format_version = header.at("format_version").get<int>();
    if (c.format_version != kCheckpointVersion)
      throw fail("unsupported format_version " + std::to_string(c.format_version) +
                 " (expected " + std::to_string(kCheckpointVersion) + ")");
    c.kind = header.at("kind").get<std::string>();
    c.config = header.at("config");
    c.metrics = header.at("metrics");
    const std::size_t data_start = 16 + static_cast<std::size_t>(len);
    const std::size_t data_size = bytes.size() - data_start;
    std::uint64_t expected_offset = 0;
    for (const auto& e : header.at("tensors")) {
      StoredTensor t;
      t.name = e.at("name").get<std::string>();
      t.dtype = e.at("dtype").get<std::string>();
      t.shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto nbytes = e.at("nbytes").get<std::uint64_t>();
      for (Index d : t.shape)
        if (d <= 0) throw fail("tensor '" + t.name + "' has a non-positive extent");
      if (std::uint64_t(shape_size(t.shape)) * dtype_size(t.dtype) != nbytes)
        throw fail("tensor '" + t.name + "' shape " + shape_to_string(t.shape) +
                   " does not match its " + std::to_string(nbytes) + " bytes");
      if (offset != expected_offset) throw fail("tensor '" + t.name + "' has an unexpected offset");
      if (offset + nbytes > data_size) throw fail("truncated data for tensor '" + t.name + "'");
      const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(data_start + offset);
      t.bytes.assign(first, first + static_cast<std::ptrdiff_t>(nbytes));
      expected_offset += nbytes;
      if (c.contains(t.name)) throw fail("duplicate tensor '" + t.name + "'");
      c.tensors.push_back(std::move(t));
    }
    if (expected_offset != data_size) throw fail("trailing bytes after tensor data");
  } catch (const json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  return deserialize_checkpoint(bytes, path.string());
}

}  // namespace sea
