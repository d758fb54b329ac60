// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef OAR_ERRORS_HPP
#define OAR_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oar {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FileNotFoundError : Error {
  explicit FileNotFoundError(const std::string& path)
      : Error("file not found: " + path), path(path) {}
  std::string path;
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};

struct EmptyCloudError : Error {
  EmptyCloudError() : Error("point cloud is empty") {}
  using Error::Error;
};

struct DegenerateCloudError : Error {
  DegenerateCloudError() : Error("all points coincide (zero scale)") {}
};

struct KTooLargeError : Error {
  KTooLargeError(int k, std::size_t available)
      : Error("k=" + std::to_string(k) + " exceeds the " +
              std::to_string(available) + " available points"),
        k(k),
        available(available) {}
  int k;
  std::size_t available;
};

struct SingularGramError : Error {
  explicit SingularGramError(std::size_t point_index)
      : Error("singular Gram matrix at point " + std::to_string(point_index)),
        point_index(point_index) {}
  std::size_t point_index;
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

struct IndexMismatchError : Error {
  using Error::Error;
};

struct SizeMismatchError : Error {
  SizeMismatchError(std::size_t a, std::size_t b)
      : Error("point counts differ: " + std::to_string(a) + " vs " +
              std::to_string(b)) {}
};

struct FractionOutOfRangeError : Error {
  explicit FractionOutOfRangeError(double f)
      : Error("fraction " + std::to_string(f) + " outside [0, 1)") {}
};

struct TOutOfRangeError : Error {
  explicit TOutOfRangeError(double t)
      : Error("interpolation parameter " + std::to_string(t) +
              " outside [0, 1]") {}
};

struct CheckpointError : Error {
  using Error::Error;
};

struct InvalidArgumentError : Error {
  using Error::Error;
};

}  // namespace oar

#endif  // OAR_ERRORS_HPP
