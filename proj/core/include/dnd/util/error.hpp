// Copyright 2026 The DnD Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace dnd {

// Every failure raised by the library derives from Error. The kind drives
// the CLI exit code mapping.
enum class ErrorKind {
  kDimension,
  kIndex,
  kContract,
  kDegenerate,
  kParse,
  kValidation,
  kNumeric,
  kConfig,
  kCorruption,
  kIncompatible,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error(ErrorKind::kDimension, m) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& m) : Error(ErrorKind::kIndex, m) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error(ErrorKind::kContract, m) {}
};

// Softmax over a fully masked row, a loss with no valid entries, a constant
// correlation input, and similar.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& m) : Error(ErrorKind::kDegenerate, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorKind::kParse, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorKind::kValidation, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorKind::kNumeric, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& m) : Error(ErrorKind::kCorruption, m) {}
};

class IncompatibleError : public Error {
 public:
  explicit IncompatibleError(const std::string& m) : Error(ErrorKind::kIncompatible, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

}  // namespace dnd
