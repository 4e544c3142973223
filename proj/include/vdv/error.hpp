// Copyright 2026 The VDV Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vdv {

/// Root of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or data violating a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Dimension or length mismatch between arguments.
class DimensionMismatch : public InvalidArgument {
 public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : InvalidArgument(what + ": expected " + std::to_string(expected) + ", got " +
                        std::to_string(got)) {}
};

/// Malformed or inconsistent file contents. Carries the byte offset of the
/// problem and the name of the offending field.
class LoadError : public Error {
 public:
  LoadError(std::string field, std::uint64_t offset, const std::string& what)
      : Error("load error at byte " + std::to_string(offset) + " (" + field + "): " + what),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const noexcept { return field_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string field_;
  std::uint64_t offset_;
};

class HeaderError : public LoadError {
 public:
  using LoadError::LoadError;
};

class LabelDomainError : public LoadError {
 public:
  using LoadError::LoadError;
};

class NonFiniteError : public LoadError {
 public:
  using LoadError::LoadError;
};

class TruncatedError : public LoadError {
 public:
  using LoadError::LoadError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A metric whose denominator is zero. Raised instead of returning NaN or 0.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace vdv
