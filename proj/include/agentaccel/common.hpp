// Copyright 2026 The agentaccel Authors
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

// Shared vocabulary types, the error hierarchy, hashing and file helpers used
// by every module of the library.

#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace agentaccel {

using Token = std::uint32_t;
using TokenSequence = std::vector<Token>;

// End-of-sequence sentinel. Word ids handed out by the tokenizer start at 1.
inline constexpr Token kEndOfSequence = 0;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  // Short machine-readable category, e.g. "load" or "integrity".
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Schema violation while reading an input file. Carries the file, the
// zero-based record index (-1 for whole-document errors) and the field.
class LoadError : public Error {
 public:
  LoadError(std::string file, long record, std::string field,
            const std::string& detail)
      : Error("load", Format(file, record, field, detail)),
        file_(std::move(file)),
        record_(record),
        field_(std::move(field)) {}

  const std::string& file() const noexcept { return file_; }
  long record() const noexcept { return record_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string Format(const std::string& file, long record,
                            const std::string& field,
                            const std::string& detail) {
    std::ostringstream os;
    os << file;
    if (record >= 0) os << ": record " << record;
    if (!field.empty()) os << ": field '" << field << "'";
    os << ": " << detail;
    return os.str();
  }

  std::string file_;
  long record_;
  std::string field_;
};

class ReferentialError : public Error {
 public:
  explicit ReferentialError(const std::string& message)
      : Error("referential_integrity", message) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& message)
      : Error("parameter", message) {}
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& message)
      : Error("integrity", message) {}
};

class StorageError : public Error {
 public:
  explicit StorageError(const std::string& message)
      : Error("storage", message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("validation", message) {}
};

class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& message)
      : Error("missing_input", message) {}
};

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

// Folds a token into a running FNV-1a state, little-endian byte order.
inline std::uint64_t fnv1a64_token(std::uint64_t h, Token t) {
  for (int i = 0; i < 4; ++i) {
    h ^= static_cast<std::uint8_t>(t >> (8 * i));
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t hash_tokens(std::span<const Token> tokens) {
  std::uint64_t h = kFnvOffset;
  for (Token t : tokens) h = fnv1a64_token(h, t);
  return h;
}

// SplitMix64 step; used wherever a portable deterministic stream is needed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

inline std::string to_hex64(std::uint64_t v) {
  std::array<std::uint8_t, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return to_hex(b);
}

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<std::uint8_t, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("internal", "sha256 digest failed");
  }
  return to_hex(std::span<const std::uint8_t>(md.data(), len));
}

inline std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Little-endian serialization of a token sequence, the canonical byte form
// used for content addressing.
inline std::vector<std::uint8_t> token_bytes(std::span<const Token> tokens) {
  std::vector<std::uint8_t> out;
  out.reserve(tokens.size() * 4);
  for (Token t : tokens) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(t >> (8 * i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

// Writes to a sibling temporary file and renames it over `path`, so readers
// observe either the old or the new content.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw StorageError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StorageError("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

}  // namespace agentaccel
