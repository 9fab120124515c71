// Copyright 2026 The SelHN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SELHN_ERROR_H_
#define SELHN_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace selhn {

// Caller passed inconsistent shapes or violated an operation precondition.
// These are programming errors rather than user errors.
class InputError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration value (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Malformed or truncated file (CLI exit code 3).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) +
                           ")"),
        offset_(offset) {}
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_ = 0;
};

// Non-finite values or degenerate geometry during training (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A row whose L2 norm is too small to normalize.
class DegenerateRowError : public NumericalError {
 public:
  DegenerateRowError(std::size_t row, double norm)
      : NumericalError("degenerate row " + std::to_string(row) +
                       " (norm " + std::to_string(norm) + ")"),
        row_(row) {}

  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

}  // namespace selhn

#endif  // SELHN_ERROR_H_
