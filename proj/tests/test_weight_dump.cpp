#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "sus/weight_dump.hpp"
#include "test_util.hpp"

namespace sus::dump {
namespace {

namespace fs = std::filesystem;

class DumpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sus_dump_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  WeightDump sample(std::size_t n = 5) const {
    RngCursor rng(RngStream(31, 0));
    WeightDump d;
    d.model = "unit";
    d.n = n;
    d.layers = 2;
    d.heads = 2;
    d.sequences_averaged = 3;
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t h = 0; h < 2; ++h) {
        HeadWeights hw;
        hw.layer = l;
        hw.head = h;
        hw.W = Mat(n, n);
        for (std::size_t i = 0; i < n; ++i) {
          double total = 0.0;
          for (std::size_t j = 0; j <= i; ++j) total += (hw.W(i, j) = rng.uniform() + 0.01);
          for (std::size_t j = 0; j <= i; ++j) hw.W(i, j) /= total;
        }
        d.entries.push_back(hw);
      }
    }
    return d;
  }

  std::string read_bytes(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  void write_bytes(const fs::path& p, const std::string& b) const {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), std::streamsize(b.size()));
  }
  void put_float(std::string& b, std::size_t offset, float f) const { std::memcpy(b.data() + offset, &f, 4); }
  void put_u32(std::string& b, std::size_t offset, std::uint32_t v) const { std::memcpy(b.data() + offset, &v, 4); }

  // Corrupts one file of a fresh dump and expects a format error naming it.
  void expect_corrupt(const std::function<void(std::string&)>& corrupt) {
    const fs::path manifest = write_weight_dump(dir_, sample());
    const fs::path file = dir_ / "layer1_head0.atnw";
    std::string b = read_bytes(file);
    corrupt(b);
    write_bytes(file, b);
    try {
      load_weight_dump(manifest);
      ADD_FAILURE() << "expected format error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kFormat);
      EXPECT_NE(std::string(e.what()).find("layer1_head0.atnw"), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
  }

  void expect_bad_manifest(const std::string& text) {
    fs::create_directories(dir_);
    const fs::path manifest = dir_ / "manifest.json";
    write_bytes(manifest, text);
    EXPECT_SUS_ERROR(load_weight_dump(manifest), ErrorKind::kFormat);
  }

  fs::path dir_;
};

TEST_F(DumpTest, RoundTripWithinFloatPrecision) {
  const WeightDump d = sample();
  const fs::path manifest = write_weight_dump(dir_, d);
  EXPECT_EQ(manifest, dir_ / "manifest.json");
  const WeightDump back = load_weight_dump(manifest);
  EXPECT_EQ(back.model, "unit");
  EXPECT_EQ(back.n, 5u);
  EXPECT_EQ(back.layers, 2u);
  EXPECT_EQ(back.heads, 2u);
  EXPECT_EQ(back.sequences_averaged, 3u);
  ASSERT_EQ(back.entries.size(), 4u);
  for (const auto& e : d.entries) {
    const HeadWeights& r = back.at(e.layer, e.head);
    for (std::size_t i = 0; i < d.n; ++i) {
      EXPECT_NEAR(r.raw_row_sums[i], 1.0, 1e-6);
      for (std::size_t j = 0; j < d.n; ++j) EXPECT_NEAR(r.W(i, j), e.W(i, j), 1e-6);
    }
  }
  EXPECT_SUS_ERROR(back.at(2, 0), ErrorKind::kLookup);
  EXPECT_EQ(read_bytes(dir_ / "layer0_head0.atnw").size(), kHeaderBytes + 25 * 4);
  EXPECT_FALSE(fs::exists(dir_ / "manifest.json.tmp"));
}

TEST_F(DumpTest, HeaderLayout) {
  write_weight_dump(dir_, sample(3));
  const std::string b = read_bytes(dir_ / "layer0_head1.atnw");
  EXPECT_EQ(b.substr(0, 4), "ATNW");
  std::uint32_t v[3];
  std::memcpy(v, b.data() + 4, 12);
  EXPECT_EQ(v[0], 1u);
  EXPECT_EQ(v[1], 3u);
  EXPECT_EQ(v[2], 0u);
  float above;
  std::memcpy(&above, b.data() + kHeaderBytes + 4, 4);  // (0, 1)
  EXPECT_EQ(above, 0.0f);
}

TEST_F(DumpTest, RenormalizesRowsWithinTolerance) {
  const fs::path manifest = write_weight_dump(dir_, sample(3));
  const fs::path file = dir_ / "layer0_head0.atnw";
  std::string b = read_bytes(file);
  put_float(b, kHeaderBytes, 1.0005f);  // row 0 sums to 1.0005
  write_bytes(file, b);
  const WeightDump d = load_weight_dump(manifest);
  EXPECT_NEAR(d.at(0, 0).raw_row_sums[0], 1.0005, 1e-6);
  EXPECT_DOUBLE_EQ(d.at(0, 0).W(0, 0), 1.0);
}

TEST_F(DumpTest, BadMagic) {
  expect_corrupt([](std::string& b) { b[0] = 'X'; });
}
TEST_F(DumpTest, BadVersion) {
  expect_corrupt([&](std::string& b) { put_u32(b, 4, 2); });
}
TEST_F(DumpTest, SizeMismatch) {
  expect_corrupt([&](std::string& b) { put_u32(b, 8, 4); });
}
TEST_F(DumpTest, ReservedNonzero) {
  expect_corrupt([&](std::string& b) { put_u32(b, 12, 7); });
}
TEST_F(DumpTest, Truncated) {
  expect_corrupt([](std::string& b) { b.resize(b.size() - 4); });
  expect_corrupt([](std::string& b) { b.resize(10); });
}
TEST_F(DumpTest, TrailingBytes) {
  expect_corrupt([](std::string& b) { b += "xx"; });
}
TEST_F(DumpTest, NegativeWeight) {
  expect_corrupt([&](std::string& b) { put_float(b, kHeaderBytes, -0.5f); });
}
TEST_F(DumpTest, NonFiniteWeight) {
  expect_corrupt([&](std::string& b) { put_float(b, kHeaderBytes, NAN); });
}
TEST_F(DumpTest, MassAboveDiagonal) {
  expect_corrupt([&](std::string& b) { put_float(b, kHeaderBytes + 4, 0.1f); });
}
TEST_F(DumpTest, RowSumOutOfTolerance) {
  expect_corrupt([&](std::string& b) { put_float(b, kHeaderBytes, 0.5f); });
}

TEST_F(DumpTest, MissingFile) {
  const fs::path manifest = write_weight_dump(dir_, sample());
  fs::remove(dir_ / "layer0_head1.atnw");
  EXPECT_SUS_ERROR(load_weight_dump(manifest), ErrorKind::kFormat);
}

TEST_F(DumpTest, ManifestErrors) {
  const std::string files = R"("files": [{"layer": 0, "head": 0, "path": "a.atnw"}])";
  auto with = [&](const std::string& fields) { return "{" + fields + ", " + files + "}"; };
  const std::string base =
      R"("format-version": 1, "model": "m", "n": 2, "layers": 1, "heads": 1, "sequences-averaged": 1)";
  expect_bad_manifest("not json");
  expect_bad_manifest("[1, 2]");
  expect_bad_manifest(with(base + R"(, "dtype": "f64", "layout": "dense-causal-rowmajor")"));
  expect_bad_manifest(with(base + R"(, "dtype": "f32", "layout": "sparse")"));
  expect_bad_manifest(with(R"("format-version": 2, "model": "m", "n": 2, "layers": 1, "heads": 1,
                              "sequences-averaged": 1, "dtype": "f32", "layout": "dense-causal-rowmajor")"));
  expect_bad_manifest(with(R"("format-version": 1, "model": "m", "n": -2, "layers": 1, "heads": 1,
                              "sequences-averaged": 1, "dtype": "f32", "layout": "dense-causal-rowmajor")"));
  expect_bad_manifest("{" + base + R"(, "dtype": "f32", "layout": "dense-causal-rowmajor", "files": []})");
  expect_bad_manifest("{" + base +
                      R"(, "dtype": "f32", "layout": "dense-causal-rowmajor",
                          "files": [{"layer": 3, "head": 0, "path": "a.atnw"}]})");
  EXPECT_SUS_ERROR(load_weight_dump(dir_ / "absent.json"), ErrorKind::kFormat);
}

TEST_F(DumpTest, DuplicateEntry) {
  write_weight_dump(dir_, sample(2));
  expect_bad_manifest(R"({"format-version": 1, "model": "m", "n": 2, "layers": 1, "heads": 1,
      "sequences-averaged": 1, "dtype": "f32", "layout": "dense-causal-rowmajor",
      "files": [{"layer": 0, "head": 0, "path": "layer0_head0.atnw"},
                {"layer": 0, "head": 0, "path": "layer0_head0.atnw"}]})");
}

TEST_F(DumpTest, WriterRejectsBadShapes) {
  EXPECT_SUS_ERROR(write_weight_file(dir_ / "x.atnw", Mat(2, 3)), ErrorKind::kDimension);
  WeightDump d = sample(3);
  d.n = 4;
  EXPECT_SUS_ERROR(write_weight_dump(dir_, d), ErrorKind::kDimension);
}

}  // namespace
}  // namespace sus::dump
