#include "sus/weight_dump.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "sus/error.hpp"

namespace sus::dump {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "weight dump I/O assumes a little-endian host");

namespace {

[[noreturn]] void format_error(const fs::path& file, std::size_t offset, const std::string& msg) {
  fail(ErrorKind::kFormat, file.string() + " @ offset " + std::to_string(offset) + ": " + msg);
}

void put_u32(std::string& buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.append(bytes, 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

void write_atomically(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kInput, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::kInput, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::size_t get_count(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0)
    format_error(file, 0, std::string("manifest field '") + key + "' missing or not a count");
  return j[key].get<std::size_t>();
}

std::string get_string(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j[key].is_string())
    format_error(file, 0, std::string("manifest field '") + key + "' missing or not a string");
  return j[key].get<std::string>();
}

HeadWeights read_weight_file(const fs::path& path, std::size_t expected_n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) format_error(path, 0, "cannot open file");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) format_error(path, bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) format_error(path, 0, "bad magic, expected ATNW");
  if (get_u32(bytes.data() + 4) != kFormatVersion) format_error(path, 4, "unsupported format version");
  const std::size_t n = get_u32(bytes.data() + 8);
  if (n != expected_n)
    format_error(path, 8, "matrix size " + std::to_string(n) + " differs from manifest n " +
                              std::to_string(expected_n));
  if (get_u32(bytes.data() + 12) != 0) format_error(path, 12, "reserved field must be zero");
  const std::size_t expected = kHeaderBytes + n * n * 4;
  if (bytes.size() < expected) format_error(path, bytes.size(), "truncated matrix data");
  if (bytes.size() > expected) format_error(path, expected, "trailing bytes after matrix data");

  HeadWeights hw;
  hw.file = path;
  hw.W = Mat(n, n);
  hw.raw_row_sums.resize(n);
  const char* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row_offset = kHeaderBytes + i * n * 4;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      float f;
      std::memcpy(&f, p + (i * n + j) * 4, 4);
      const double w = f;
      if (!std::isfinite(w) || w < 0.0)
        format_error(path, row_offset + j * 4, "weight is negative or not finite");
      if (j > i && w != 0.0) format_error(path, row_offset + j * 4, "nonzero weight above diagonal");
      hw.W(i, j) = w;
      total += w;
    }
    hw.raw_row_sums[i] = total;
    if (std::abs(total - 1.0) > kRowSumTolerance)
      format_error(path, row_offset, "row " + std::to_string(i) + " sums to " + std::to_string(total));
    for (std::size_t j = 0; j <= i; ++j) hw.W(i, j) /= total;
  }
  return hw;
}

}  // namespace

const HeadWeights& WeightDump::at(std::size_t layer, std::size_t head) const {
  for (const auto& e : entries)
    if (e.layer == layer && e.head == head) return e;
  fail(ErrorKind::kLookup, "no weights for layer " + std::to_string(layer) + " head " +
                               std::to_string(head));
}

void write_weight_file(const fs::path& path, const Mat& W) {
  require(W.rows() == W.cols() && W.rows() >= 1, ErrorKind::kDimension,
          "weight dump needs a non-empty square matrix");
  const std::size_t n = W.rows();
  std::string buf;
  buf.reserve(kHeaderBytes + n * n * 4);
  buf.append(kMagic, 4);
  put_u32(buf, kFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(n));
  put_u32(buf, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float f = j > i ? 0.0f : static_cast<float>(W(i, j));
      char bytes[4];
      std::memcpy(bytes, &f, 4);
      buf.append(bytes, 4);
    }
  }
  write_atomically(path, buf);
}

fs::path write_weight_dump(const fs::path& dir, const WeightDump& dump) {
  fs::create_directories(dir);
  json files = json::array();
  for (const auto& e : dump.entries) {
    require(e.W.rows() == dump.n, ErrorKind::kDimension, "entry size differs from dump n");
    const std::string name = "layer" + std::to_string(e.layer) + "_head" + std::to_string(e.head) + ".atnw";
    write_weight_file(dir / name, e.W);
    files.push_back(json{{"layer", e.layer}, {"head", e.head}, {"path", name}});
  }
  nlohmann::ordered_json manifest;
  manifest["format-version"] = kFormatVersion;
  manifest["model"] = dump.model;
  manifest["n"] = dump.n;
  manifest["layers"] = dump.layers;
  manifest["heads"] = dump.heads;
  manifest["dtype"] = kDtype;
  manifest["layout"] = kLayout;
  manifest["files"] = files;
  manifest["sequences-averaged"] = dump.sequences_averaged;
  const fs::path path = dir / "manifest.json";
  write_atomically(path, manifest.dump(2) + "\n");
  return path;
}

WeightDump load_weight_dump(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) format_error(manifest_path, 0, "cannot open manifest");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    format_error(manifest_path, e.byte, std::string("invalid JSON: ") + e.what());
  }
  if (!m.is_object()) format_error(manifest_path, 0, "manifest is not a JSON object");

  if (get_count(m, "format-version", manifest_path) != kFormatVersion)
    format_error(manifest_path, 0, "unsupported format-version");
  if (get_string(m, "dtype", manifest_path) != kDtype)
    format_error(manifest_path, 0, "dtype must be \"f32\"");
  if (get_string(m, "layout", manifest_path) != kLayout)
    format_error(manifest_path, 0, "layout must be \"dense-causal-rowmajor\"");

  WeightDump dump;
  dump.model = get_string(m, "model", manifest_path);
  dump.n = get_count(m, "n", manifest_path);
  dump.layers = get_count(m, "layers", manifest_path);
  dump.heads = get_count(m, "heads", manifest_path);
  dump.sequences_averaged = get_count(m, "sequences-averaged", manifest_path);
  if (dump.n == 0) format_error(manifest_path, 0, "n must be positive");
  if (!m.contains("files") || !m["files"].is_array() || m["files"].empty())
    format_error(manifest_path, 0, "manifest lists no files");

  const fs::path base = manifest_path.parent_path();
  std::map<std::pair<std::size_t, std::size_t>, bool> seen;
  for (const auto& f : m["files"]) {
    if (!f.is_object()) format_error(manifest_path, 0, "file entry is not an object");
    const std::size_t layer = get_count(f, "layer", manifest_path);
    const std::size_t head = get_count(f, "head", manifest_path);
    if (layer >= dump.layers || head >= dump.heads)
      format_error(manifest_path, 0, "file entry (layer " + std::to_string(layer) + ", head " +
                                         std::to_string(head) + ") out of range");
    if (seen[{layer, head}])
      format_error(manifest_path, 0, "duplicate file entry for layer " + std::to_string(layer) +
                                         " head " + std::to_string(head));
    seen[{layer, head}] = true;
    fs::path path = get_string(f, "path", manifest_path);
    if (path.is_relative()) path = base / path;
    HeadWeights hw = read_weight_file(path, dump.n);
    hw.layer = layer;
    hw.head = head;
    dump.entries.push_back(std::move(hw));
  }
  std::sort(dump.entries.begin(), dump.entries.end(), [](const auto& a, const auto& b) {
    return std::pair(a.layer, a.head) < std::pair(b.layer, b.head);
  });
  return dump;
}

}  // namespace sus::dump
