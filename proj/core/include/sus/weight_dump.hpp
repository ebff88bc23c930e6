#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sus/mat.hpp"

namespace sus::dump {

// On-disk attention-weight dumps.
//
// manifest.json:
//   { "format-version": 1, "model": str, "n": int, "layers": int, "heads": int,
//     "dtype": "f32", "layout": "dense-causal-rowmajor",
//     "files": [{"layer": int, "head": int, "path": str}],
//     "sequences-averaged": int }
//
// Each binary file: "ATNW", u32 version, u32 n, u32 reserved (0), all little
// endian, then n*n f32 little-endian row-major with zeros above the diagonal.

inline constexpr char kMagic[4] = {'A', 'T', 'N', 'W'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr double kRowSumTolerance = 1e-3;
inline constexpr const char* kDtype = "f32";
inline constexpr const char* kLayout = "dense-causal-rowmajor";

struct HeadWeights {
  std::size_t layer = 0;
  std::size_t head = 0;
  Mat W;                             // rows renormalized to sum to 1
  std::vector<double> raw_row_sums;  // sums as stored, before renormalization
  std::filesystem::path file;
};

struct WeightDump {
  std::string model;
  std::size_t n = 0;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t sequences_averaged = 0;
  std::vector<HeadWeights> entries;  // ordered by (layer, head)

  const HeadWeights& at(std::size_t layer, std::size_t head) const;
};

// Writes manifest.json and one file per entry into `dir` (created if
// missing). Entry paths are written relative to `dir`. Returns the manifest path.
std::filesystem::path write_weight_dump(const std::filesystem::path& dir, const WeightDump& dump);

// Writes a single matrix file.
void write_weight_file(const std::filesystem::path& path, const Mat& W);

// Reads and validates; format errors name the file and byte offset.
WeightDump load_weight_dump(const std::filesystem::path& manifest_path);

}  // namespace sus::dump
