#pragma once

#include <gtest/gtest.h>

#include <vector>

#include "sus/error.hpp"
#include "sus/mat.hpp"
#include "sus/rng.hpp"

#define EXPECT_SUS_ERROR(stmt, error_kind)                                  \
  do {                                                                      \
    try {                                                                   \
      stmt;                                                                 \
      ADD_FAILURE() << "expected " << sus::to_string(error_kind);           \
    } catch (const sus::Error& e) {                                         \
      EXPECT_EQ(e.kind(), error_kind) << e.what();                          \
    }                                                                       \
  } while (0)

namespace sus::testing {

inline Mat normal_mat(std::size_t rows, std::size_t cols, RngCursor& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (double& v : m.flat()) v = scale * rng.normal();
  return m;
}

inline std::vector<double> flat_of(std::initializer_list<const Mat*> mats) {
  std::vector<double> out;
  for (const Mat* m : mats) out.insert(out.end(), m->flat().begin(), m->flat().end());
  return out;
}

}  // namespace sus::testing
