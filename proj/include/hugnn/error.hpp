/**
 * Copyright 2026 The hugnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hugnn {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An input lies outside the domain of an operation (e.g. log of a non-positive value).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (hyper-parameters, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite quantity. `diagnostic` holds a JSON dump of the offending state.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string diagnostic)
      : Error(what), diagnostic_(std::move(diagnostic)) {}
  const std::string& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::string diagnostic_;
};

/// Malformed or missing dataset / checkpoint file. Carries the file and 1-based line (0 when not line-specific).
class LoadError : public Error {
 public:
  LoadError(std::string file, std::size_t line, const std::string& message)
      : Error(format(file, line, message)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& message) {
    std::string out = file;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + message;
  }

  std::string file_;
  std::size_t line_;
};

}  // namespace hugnn
