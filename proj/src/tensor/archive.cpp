#include "optrot/tensor/archive.hpp"

#include "optrot/error.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>
#include <iterator>

namespace optrot {
namespace {

using nlohmann::json;

template <typename U>
void put_le(std::vector<unsigned char>& out, U bits) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFFU));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(p[b]) << (8 * b);
  return bits;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

const char* dtype_name(Dtype dtype) { return dtype == Dtype::kF32 ? "f32" : "f64"; }

Dtype parse_dtype(const std::string& name) {
  if (name == "f32") return Dtype::kF32;
  if (name == "f64") return Dtype::kF64;
  throw IoError("unknown dtype '" + name + "'");
}

std::size_t dtype_size(Dtype dtype) { return dtype == Dtype::kF32 ? 4 : 8; }

void TensorArchive::add(std::string name, Matrix value, Dtype dtype) {
  require_finite(value, name.c_str());
  if (contains(name)) throw InvalidArgument("archive already contains '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(TensorEntry{std::move(name), dtype, std::move(value)});
}

bool TensorArchive::contains(const std::string& name) const { return index_.count(name) != 0; }

const Matrix& TensorArchive::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw IoError("archive has no tensor '" + name + "'");
  return entries_[it->second].value;
}

Dtype TensorArchive::dtype(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw IoError("archive has no tensor '" + name + "'");
  return entries_[it->second].dtype;
}

void TensorArchive::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<unsigned char> blob;
  json entries = json::array();
  for (const auto& e : entries_) {
    while (blob.size() % kAlignment != 0) blob.push_back(0);
    const std::size_t offset = blob.size();
    for (Eigen::Index i = 0; i < e.value.size(); ++i) {
      const double x = e.value.data()[i];
      if (e.dtype == Dtype::kF32) {
        put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      } else {
        put_le(blob, std::bit_cast<std::uint64_t>(x));
      }
    }
    entries.push_back({{"name", e.name},
                       {"dtype", dtype_name(e.dtype)},
                       {"shape", {e.value.rows(), e.value.cols()}},
                       {"offset", offset},
                       {"byte_length", blob.size() - offset}});
  }
  json manifest = {{"format", "optrot-tensor-archive"}, {"version", 1}, {"entries", entries}};

  std::ofstream blob_out(dir / kBlobName, std::ios::binary | std::ios::trunc);
  blob_out.write(reinterpret_cast<const char*>(blob.data()),
                 static_cast<std::streamsize>(blob.size()));
  std::ofstream manifest_out(dir / kManifestName, std::ios::trunc);
  manifest_out << manifest.dump(2) << '\n';
  if (!blob_out || !manifest_out) throw IoError("failed writing archive to " + dir.string());
}

TensorArchive TensorArchive::read(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no archive at " + dir.string());
  json manifest;
  try {
    const auto text = read_file(dir / kManifestName);
    manifest = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  const auto blob = read_file(dir / kBlobName);

  TensorArchive archive;
  try {
    for (const auto& e : manifest.at("entries")) {
      const Dtype dtype = parse_dtype(e.at("dtype").get<std::string>());
      const auto rows = e.at("shape").at(0).get<Eigen::Index>();
      const auto cols = e.at("shape").at(1).get<Eigen::Index>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto length = e.at("byte_length").get<std::size_t>();
      const auto count = static_cast<std::size_t>(rows * cols);
      if (length != count * dtype_size(dtype) || offset + length > blob.size() ||
          offset % kAlignment != 0) {
        throw IoError("inconsistent manifest entry '" + e.at("name").get<std::string>() + "'");
      }
      Matrix m(rows, cols);
      const unsigned char* p = blob.data() + offset;
      for (std::size_t i = 0; i < count; ++i) {
        m.data()[i] = dtype == Dtype::kF32
                          ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i)))
                          : std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
      }
      archive.add(e.at("name").get<std::string>(), std::move(m), dtype);
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return archive;
}

}  // namespace optrot
