#pragma once

// Binary parameter container shared by every model:
//
//   "OVLMCKPT" | u32 version | u32 #metadata | (str key, str value)*
//   | u32 #tensors | (str name, u32 rank, u64 dim*, f32 value*)*
//
// where str = u32 byte length + UTF-8 bytes. All integers and floats are
// little-endian. Values are stored as 32-bit floats, so a load/save cycle
// reproduces a file bit for bit.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ovlm/optim.hpp"
#include "ovlm/tensor.hpp"

namespace ovlm {

inline constexpr char kCheckpointMagic[8] = {'O', 'V', 'L', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoredArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<StoredArray> arrays;

  void add(const std::string& name, const Tensor& tensor);
  void add_all(std::span<const Parameter> params);
  const StoredArray& find(const std::string& name) const;
  // Copies the named array into `tensor`; shapes must agree.
  void restore(const std::string& name, Tensor& tensor) const;
  void restore_all(std::span<Parameter> params) const;
  const std::string& meta(const std::string& key) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ovlm
