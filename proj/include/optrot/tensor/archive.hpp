#pragma once

#include "optrot/tensor/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace optrot {

enum class Dtype { kF32, kF64 };

const char* dtype_name(Dtype dtype);
Dtype parse_dtype(const std::string& name);
std::size_t dtype_size(Dtype dtype);

struct TensorEntry {
  std::string name;
  Dtype dtype = Dtype::kF64;
  Matrix value;
};

// On-disk tensor archive: a directory holding `manifest.json` and a single
// little-endian, row-major blob `tensors.bin`. Every tensor starts at a
// 64-byte aligned offset; the manifest lists
//   {name, dtype: "f32"|"f64", shape: [rows, cols], offset, byte_length}
// in insertion order. Output is byte-identical for identical input.
class TensorArchive {
 public:
  static constexpr std::size_t kAlignment = 64;
  static constexpr const char* kManifestName = "manifest.json";
  static constexpr const char* kBlobName = "tensors.bin";

  void add(std::string name, Matrix value, Dtype dtype = Dtype::kF64);

  bool contains(const std::string& name) const;
  const Matrix& get(const std::string& name) const;
  Dtype dtype(const std::string& name) const;
  const std::vector<TensorEntry>& entries() const noexcept { return entries_; }

  // Creates the directory if needed; throws IoError on failure.
  void write(const std::filesystem::path& dir) const;
  static TensorArchive read(const std::filesystem::path& dir);

 private:
  std::vector<TensorEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace optrot
