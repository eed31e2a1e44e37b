#include "ovlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ovlm {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw CheckpointError("checkpoint: unexpected end of data");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string get_str(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  std::string s(n, '\0');
  if (n > 0) read_exact(in, s.data(), n);
  return s;
}

}  // namespace

void Checkpoint::add(const std::string& name, const Tensor& tensor) {
  StoredArray arr;
  arr.name = name;
  arr.shape = {tensor.rows(), tensor.cols()};
  arr.values.reserve(tensor.size());
  for (double v : tensor.values()) arr.values.push_back(static_cast<float>(v));
  arrays.push_back(std::move(arr));
}

void Checkpoint::add_all(std::span<const Parameter> params) {
  for (const auto& p : params) add(p.name, p.tensor);
}

const StoredArray& Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw CheckpointError("checkpoint: no array named '" + name + "'");
}

void Checkpoint::restore(const std::string& name, Tensor& tensor) const {
  const auto& arr = find(name);
  if (arr.shape.size() != 2 || arr.shape[0] != tensor.rows() || arr.shape[1] != tensor.cols()) {
    throw CheckpointError("checkpoint: shape mismatch for '" + name + "'");
  }
  auto dst = tensor.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = arr.values[i];
}

void Checkpoint::restore_all(std::span<Parameter> params) const {
  for (auto& p : params) restore(p.name, p.tensor);
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw CheckpointError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& arr : ckpt.arrays) {
    put_str(out, arr.name);
    put_u32(out, static_cast<std::uint32_t>(arr.shape.size()));
    for (auto d : arr.shape) put_u64(out, d);
    for (float f : arr.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw CheckpointError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  read_exact(in, magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("checkpoint: bad magic header");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t n_meta = get_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_str(in);
    ckpt.metadata[k] = get_str(in);
  }
  const std::uint32_t n_arrays = get_u32(in);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    StoredArray arr;
    arr.name = get_str(in);
    const std::uint32_t rank = get_u32(in);
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      arr.shape.push_back(get_u64(in));
      count *= arr.shape.back();
    }
    arr.values.resize(count);
    for (auto& f : arr.values) f = std::bit_cast<float>(get_u32(in));
    ckpt.arrays.push_back(std::move(arr));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace ovlm
