#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "devo/error.hpp"

// Fails unless `expr` throws devo::Error of the given kind.
#define CHECK_THROWS_KIND(expr, expected_kind)                               \
  do {                                                                       \
    bool thrown_ = false;                                                    \
    try {                                                                    \
      (void)(expr);                                                          \
    } catch (const devo::Error& e_) {                                        \
      thrown_ = true;                                                        \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());                \
    }                                                                        \
    CHECK_MESSAGE(thrown_, "expected a devo::Error from " #expr);            \
  } while (0)

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("devo_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}
