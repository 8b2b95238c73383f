#include "cirlab/archive.hpp"

#include "cirlab/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace cirlab {

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'C', 'I', 'R', 'L', 'A', 'B', '\x01', '\x00'};
}

const ad::Matrix& Archive::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw DataError("archive has no tensor named '" + name + "'");
}

bool Archive::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::ordered_json header;
  header["metadata"] = archive.metadata;
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& t : archive.tensors)
    header["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  const std::string header_text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t header_size = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_size), sizeof header_size);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& t : archive.tensors) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = t.value;
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  }
  if (!out) throw DataError("short write to " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open archive " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError(path.string() + " is not a cirlab archive");
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof header_size);
  std::string header_text(header_size, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw DataError("truncated archive header in " + path.string());

  const auto header = nlohmann::ordered_json::parse(header_text);
  Archive archive;
  archive.metadata = header.at("metadata");
  for (const auto& entry : header.at("tensors")) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values(rows, cols);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw DataError("truncated tensor data in " + path.string());
    archive.tensors.push_back({entry.at("name").get<std::string>(), values});
  }
  return archive;
}

}  // namespace cirlab
