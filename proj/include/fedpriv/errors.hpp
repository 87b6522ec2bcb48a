// Copyright 2026 The fedpriv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDPRIV_ERRORS_HPP_
#define FEDPRIV_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedpriv {

// Base class for every error raised by the library. `kind()` is a stable
// machine-readable tag used in CLI error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("ParseError",
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateUserId : public Error {
 public:
  explicit DuplicateUserId(const std::string& user_id)
      : Error("DuplicateUserId", "duplicate user_id '" + user_id + "'") {}
};

class TooFewRecords : public Error {
 public:
  explicit TooFewRecords(const std::string& message)
      : Error("TooFewRecords", message) {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("DimensionMismatch",
              "expected dimension " + std::to_string(expected) + ", got " +
                  std::to_string(actual)) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("InvalidArgument", message) {}
};

class CalibrationOutOfRange : public Error {
 public:
  explicit CalibrationOutOfRange(const std::string& message)
      : Error("CalibrationOutOfRange", message) {}
};

class BudgetExhausted : public Error {
 public:
  explicit BudgetExhausted(const std::string& message)
      : Error("BudgetExhausted", message) {}
};

class TooLarge : public Error {
 public:
  explicit TooLarge(const std::string& message) : Error("TooLarge", message) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("ConfigError", field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class MismatchedPairs : public Error {
 public:
  explicit MismatchedPairs(const std::string& message)
      : Error("MismatchedPairs", message) {}
};

}  // namespace fedpriv

#endif  // FEDPRIV_ERRORS_HPP_
