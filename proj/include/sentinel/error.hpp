// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sentinel {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A 1-based index fell outside its declared range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated (shape, arity, range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Text input did not follow its grammar. `line()` is 1-based, 0 if unknown.
class FormatError : public Error {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Full permutation expansion requested for N above the configured cap.
class FactorialCapExceeded : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// No model is registered for the requested object count.
class MissingModel : public Error {
 public:
  explicit MissingModel(std::size_t n_objects)
      : Error("no model for N=" + std::to_string(n_objects) + "; train one with `sentinel train --n " +
              std::to_string(n_objects) + " --bank <root>`"),
        n_objects_(n_objects) {}

  std::size_t n_objects() const noexcept { return n_objects_; }

 private:
  std::size_t n_objects_;
};

}  // namespace sentinel
