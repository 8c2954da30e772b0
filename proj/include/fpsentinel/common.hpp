// Copyright 2026 The FP Sentinel Authors
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

#ifndef FPSENTINEL_COMMON_HPP_
#define FPSENTINEL_COMMON_HPP_

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fpsentinel {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ErrorCode {
  kInvalidIdentifier,
  kParse,
  kSchema,
  kValidation,
  kConfig,
  kNotFound,
  kVersion,
  kIo,
  kInfeasible,
  kDimension,
  kUndefined,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidIdentifier: return "invalid-identifier";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kUndefined: return "undefined";
  }
  return "unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse errors carry the byte offset reported by the JSON reader.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset)
      : Error(ErrorCode::kParse, message), byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Schema errors name the offending field.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& field)
      : Error(ErrorCode::kSchema, "missing or mistyped field: " + field),
        field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// SplitMix64 finalizer. Used to derive independent sub-seeds so that
// per-site and per-client work is reproducible regardless of ordering.
inline constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t DeriveSeed(std::uint64_t seed,
                                          std::uint64_t a,
                                          std::uint64_t b = 0) {
  return Mix64(Mix64(Mix64(seed) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

// FNV-1a, stable across platforms (std::hash is not).
inline constexpr std::uint64_t Fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string ToHex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_COMMON_HPP_
