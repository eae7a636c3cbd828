// Copyright 2026 The CountPath Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace countpath {

/// Base class of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A statistic is mathematically undefined for the given input
/// (constant truths for R², a single-category table for kappa, ...).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. Carries a 1-based position; column 0 means
/// "whole line".
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, std::size_t column,
             const std::string& what)
      : Error(format(source, line, column, what)),
        source_(std::move(source)),
        line_(line),
        column_(column) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& source, std::size_t line,
                            std::size_t column, const std::string& what) {
    std::string out = source.empty() ? std::string("<input>") : source;
    out += ':' + std::to_string(line);
    if (column > 0) out += ':' + std::to_string(column);
    out += ": " + what;
    return out;
  }

  std::string source_;
  std::size_t line_;
  std::size_t column_;
};

/// Persisted run record failed version or checksum validation.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace countpath
