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

// Persistent prefix KV-cache store.
//
// Layout of a store directory:
//   manifest.json        entries (key, sizes, tag, blob name, checksum)
//   <key-hash>.kv        one blob per entry
//
// Blob file: 8-byte magic "AXKVBLOB", u32 version, u32 reserved, then a
// geometry descriptor (u32 layers, u32 kv_heads, u32 head_dim,
// u32 bytes_per_element, u64 token_count), then the raw KV byte stream. All
// integers are little-endian. The checksum recorded in the manifest is the
// SHA-256 of the whole file.
//
// No model runs here, so the KV stream is synthesized: the block for
// position p is a SplitMix64 expansion keyed by the geometry and a running
// hash of tokens[0..p]. Block p therefore depends only on the tokens up to
// p, and the stream of a prefix is a byte prefix of the stream of any
// extension of it.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentaccel/common.hpp"
#include "json.hpp"

namespace agentaccel::kvstore {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct ModelGeometry {
  std::string name = "unnamed";
  std::uint32_t layers = 1;
  std::uint32_t kv_heads = 1;
  std::uint32_t head_dim = 1;
  std::uint32_t bytes_per_element = 2;
  std::uint64_t param_count = 0;   // weights, for compute cost
  std::uint64_t params_bytes = 0;  // weight bytes streamed per decode step

  std::uint64_t kv_bytes_per_token() const {
    return std::uint64_t{layers} * 2 * kv_heads * head_dim * bytes_per_element;
  }

  void validate() const {
    if (layers == 0 || kv_heads == 0 || head_dim == 0)
      throw ParameterError("geometry '" + name + "': layers, kv_heads and head_dim must be positive");
    if (bytes_per_element != 2 && bytes_per_element != 4)
      throw ParameterError("geometry '" + name + "': bytes_per_element must be 2 or 4");
  }

  // Identifies the KV layout; the name and weight sizes are not part of it.
  std::uint64_t layout_id() const {
    std::uint64_t h = kFnvOffset;
    for (std::uint32_t v : {layers, kv_heads, head_dim, bytes_per_element}) h = fnv1a64_token(h, v);
    return h;
  }

  bool same_layout(const ModelGeometry& o) const {
    return layers == o.layers && kv_heads == o.kv_heads && head_dim == o.head_dim &&
           bytes_per_element == o.bytes_per_element;
  }

  json to_json() const {
    return {{"name", name},
            {"layers", layers},
            {"kv_heads", kv_heads},
            {"head_dim", head_dim},
            {"bytes_per_element", bytes_per_element},
            {"param_count", param_count},
            {"params_bytes", params_bytes}};
  }

  static ModelGeometry from_json(const json& j) {
    ModelGeometry g;
    try {
      g.name = j.value("name", std::string("unnamed"));
      g.layers = j.at("layers").get<std::uint32_t>();
      g.kv_heads = j.at("kv_heads").get<std::uint32_t>();
      g.head_dim = j.at("head_dim").get<std::uint32_t>();
      g.bytes_per_element = j.at("bytes_per_element").get<std::uint32_t>();
      g.param_count = j.value("param_count", std::uint64_t{0});
      g.params_bytes = j.value("params_bytes", std::uint64_t{0});
    } catch (const json::exception& e) {
      throw LoadError("geometry", -1, "", e.what());
    }
    g.validate();
    return g;
  }

  static ModelGeometry load(const fs::path& path) {
    try {
      return from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
      throw LoadError(path.string(), -1, "", e.what());
    }
  }
};

// Mistral-7B-style layout (32 layers, 8 KV heads, head_dim 128, fp16).
inline ModelGeometry geometry_7b() {
  return {"7b-fp16", 32, 8, 128, 2, 7'241'732'096ULL, 14'483'464'192ULL};
}

// Tiny layout for on-disk experiments; weight sizes match the 7B preset so
// that cost modeling is unaffected.
inline ModelGeometry geometry_desk() {
  return {"desk", 2, 2, 8, 2, 7'241'732'096ULL, 14'483'464'192ULL};
}

inline std::uint64_t kv_size(std::uint64_t token_count, const ModelGeometry& g) {
  return token_count * g.kv_bytes_per_token();
}

// Synthetic KV byte stream for a key (see the file comment).
inline std::vector<std::uint8_t> synthesize_kv(const ModelGeometry& g, std::span<const Token> key) {
  const std::uint64_t block = g.kv_bytes_per_token();
  std::vector<std::uint8_t> out(key.size() * block);
  std::uint64_t chain = fnv1a64_token(kFnvOffset, static_cast<Token>(g.layout_id()));
  chain = fnv1a64_token(chain, static_cast<Token>(g.layout_id() >> 32));
  for (std::size_t p = 0; p < key.size(); ++p) {
    chain = fnv1a64_token(chain, key[p]);
    std::uint64_t state = chain ^ (0xD6E8FEB86659FD93ULL * (p + 1));
    std::uint8_t* dst = out.data() + p * block;
    std::uint64_t written = 0;
    while (written < block) {
      std::uint64_t word = splitmix64(state);
      std::uint64_t n = std::min<std::uint64_t>(8, block - written);
      for (std::uint64_t b = 0; b < n; ++b) dst[written + b] = static_cast<std::uint8_t>(word >> (8 * b));
      written += n;
    }
  }
  return out;
}

enum class EntryTag { kStatic, kClusterCombination, kArbiterStatic };

inline std::string to_string(EntryTag t) {
  switch (t) {
    case EntryTag::kStatic: return "static";
    case EntryTag::kClusterCombination: return "cluster_combination";
    case EntryTag::kArbiterStatic: return "arbiter_static";
  }
  return "static";
}

inline EntryTag tag_from_string(const std::string& s) {
  if (s == "static") return EntryTag::kStatic;
  if (s == "cluster_combination") return EntryTag::kClusterCombination;
  if (s == "arbiter_static") return EntryTag::kArbiterStatic;
  throw LoadError("manifest", -1, "tag", "unknown tag '" + s + "'");
}

struct CacheEntry {
  TokenSequence key;
  std::uint64_t token_count = 0;
  std::uint64_t byte_size = 0;
  EntryTag tag = EntryTag::kStatic;
  std::string key_hash;
  std::string blob_file;
  std::string checksum;
};

inline std::string key_hash(std::span<const Token> key) {
  auto bytes = token_bytes(key);
  return sha256_hex(bytes);
}

// ---------------------------------------------------------------------------
// Prefix index
// ---------------------------------------------------------------------------

struct PrefixMatch {
  std::optional<std::size_t> entry;  // index into the key list
  std::size_t match_len = 0;

  bool operator==(const PrefixMatch&) const = default;
};

// Preference among keys covering the same number of prompt tokens: the
// shorter key, then the lexicographically smaller one.
inline bool preferred_key(std::span<const Token> a, std::span<const Token> b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Token trie over cache keys. Every node remembers the preferred key whose
// path passes through it, so a lookup is a single walk down the prompt.
class PrefixIndex {
 public:
  PrefixIndex() { nodes_.emplace_back(); }

  explicit PrefixIndex(const std::vector<TokenSequence>& keys) : PrefixIndex() {
    for (std::size_t i = 0; i < keys.size(); ++i) insert(keys, i);
  }

  PrefixMatch longest(std::span<const Token> prompt) const {
    std::uint32_t node = 0;
    std::size_t depth = 0;
    while (depth < prompt.size()) {
      auto next = child(node, prompt[depth]);
      if (!next) break;
      node = *next;
      ++depth;
    }
    if (depth == 0) return {};
    return {nodes_[node].best, depth};
  }

 private:
  struct Node {
    std::vector<std::pair<Token, std::uint32_t>> children;
    std::optional<std::size_t> best;
  };

  std::optional<std::uint32_t> child(std::uint32_t node, Token t) const {
    for (const auto& [tok, idx] : nodes_[node].children)
      if (tok == t) return idx;
    return std::nullopt;
  }

  void insert(const std::vector<TokenSequence>& keys, std::size_t i) {
    const auto& key = keys[i];
    std::uint32_t node = 0;
    for (Token t : key) {
      auto next = child(node, t);
      if (!next) {
        nodes_.emplace_back();
        next = static_cast<std::uint32_t>(nodes_.size() - 1);
        nodes_[node].children.emplace_back(t, *next);
      }
      node = *next;
      auto& best = nodes_[node].best;
      if (!best || preferred_key(key, keys[*best])) best = i;
    }
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

struct PrefixRequest {
  TokenSequence tokens;
  EntryTag tag = EntryTag::kStatic;
};

struct CacheHit {
  const CacheEntry* entry = nullptr;
  std::size_t match_len = 0;
};

struct LoadAccount {
  std::uint64_t bytes = 0;
  double seconds = 0.0;
};

inline constexpr char kBlobMagic[8] = {'A', 'X', 'K', 'V', 'B', 'L', 'O', 'B'};
inline constexpr std::uint32_t kBlobVersion = 1;
inline constexpr std::size_t kBlobHeaderSize = 16 + 24;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
inline std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(in[at + i])} << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_blob(const ModelGeometry& g, std::uint64_t token_count,
                               std::span<const std::uint8_t> payload) {
  std::string out;
  out.reserve(kBlobHeaderSize + payload.size());
  out.append(kBlobMagic, sizeof(kBlobMagic));
  detail::put_u32(out, kBlobVersion);
  detail::put_u32(out, 0);
  detail::put_u32(out, g.layers);
  detail::put_u32(out, g.kv_heads);
  detail::put_u32(out, g.head_dim);
  detail::put_u32(out, g.bytes_per_element);
  detail::put_u64(out, token_count);
  out.append(reinterpret_cast<const char*>(payload.data()), payload.size());
  return out;
}

class KvStore {
 public:
  static constexpr const char* kManifestName = "manifest.json";

  // Opens an existing store, or an empty one bound to `geometry` when the
  // directory has no manifest yet.
  KvStore(fs::path dir, std::optional<ModelGeometry> geometry = std::nullopt) : dir_(std::move(dir)) {
    fs::path manifest = dir_ / kManifestName;
    if (fs::exists(manifest)) {
      load_manifest(manifest);
      if (geometry && !geometry->same_layout(geometry_))
        throw ParameterError("store at '" + dir_.string() + "' was built with a different geometry");
    } else {
      geometry_ = geometry.value_or(ModelGeometry{});
      geometry_.validate();
    }
  }

  static KvStore open_existing(const fs::path& dir) {
    if (!fs::exists(dir / kManifestName))
      throw MissingInputError("no cache manifest in '" + dir.string() + "'");
    return KvStore(dir);
  }

  const fs::path& dir() const { return dir_; }
  const ModelGeometry& geometry() const { return geometry_; }
  const std::vector<CacheEntry>& entries() const { return entries_; }

  std::uint64_t total_bytes() const {
    std::uint64_t s = 0;
    for (const auto& e : entries_) s += e.byte_size;
    return s;
  }

  // Persists one entry per distinct prefix, then swaps the manifest. On any
  // write failure, blobs created by this call are removed and the manifest
  // is left untouched.
  std::vector<CacheEntry> precompute(const std::vector<PrefixRequest>& prefixes) {
    if (prefixes.empty()) throw ParameterError("precompute needs at least one prefix");
    for (const auto& p : prefixes)
      if (p.tokens.empty()) throw ParameterError("precompute prefixes must be non-empty");

    std::map<TokenSequence, EntryTag> distinct;
    for (const auto& p : prefixes) distinct.emplace(p.tokens, p.tag);

    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw StorageError("cannot create '" + dir_.string() + "': " + ec.message());

    std::vector<fs::path> created;
    std::map<std::string, CacheEntry> merged;
    for (const auto& e : entries_) merged.emplace(e.key_hash, e);
    std::vector<CacheEntry> written;
    try {
      for (const auto& [key, tag] : distinct) {
        CacheEntry e;
        e.key = key;
        e.token_count = key.size();
        e.byte_size = kv_size(key.size(), geometry_);
        e.tag = tag;
        e.key_hash = key_hash(key);
        e.blob_file = e.key_hash + ".kv";
        auto payload = synthesize_kv(geometry_, key);
        std::string blob = encode_blob(geometry_, key.size(), payload);
        e.checksum = sha256_hex(blob);
        fs::path target = dir_ / e.blob_file;
        bool existed = fs::exists(target);
        write_file_atomic(target, blob);
        if (!existed) created.push_back(target);
        merged[e.key_hash] = e;
        written.push_back(std::move(e));
      }
      std::vector<CacheEntry> next;
      for (auto& [h, e] : merged) next.push_back(std::move(e));
      write_file_atomic(dir_ / kManifestName, manifest_json(next).dump(1) + "\n");
      entries_ = std::move(next);
    } catch (const Error&) {
      for (const auto& p : created) fs::remove(p, ec);
      throw;
    } catch (const std::exception& ex) {
      for (const auto& p : created) fs::remove(p, ec);
      throw StorageError(ex.what());
    }
    rebuild_index();
    return written;
  }

  CacheHit longest_cached_prefix(std::span<const Token> prompt) const {
    auto m = index_.longest(prompt);
    if (!m.entry) return {};
    return {&entries_[*m.entry], m.match_len};
  }

  // The KV byte stream of an entry, after verifying the file checksum and
  // header.
  std::vector<std::uint8_t> load_blob(const CacheEntry& entry) const {
    fs::path path = dir_ / entry.blob_file;
    std::string blob;
    try {
      blob = read_file(path);
    } catch (const MissingInputError&) {
      throw IntegrityError("blob '" + entry.blob_file + "' is missing");
    }
    if (sha256_hex(blob) != entry.checksum)
      throw IntegrityError("blob '" + entry.blob_file + "' fails its checksum");
    if (blob.size() < kBlobHeaderSize || std::memcmp(blob.data(), kBlobMagic, sizeof(kBlobMagic)) != 0)
      throw IntegrityError("blob '" + entry.blob_file + "' has a bad header");
    if (detail::get_le(blob, 8, 4) != kBlobVersion)
      throw IntegrityError("blob '" + entry.blob_file + "' has an unsupported version");
    if (detail::get_le(blob, 32, 8) != entry.token_count ||
        blob.size() - kBlobHeaderSize != entry.byte_size)
      throw IntegrityError("blob '" + entry.blob_file + "' does not match its manifest entry");
    return {blob.begin() + kBlobHeaderSize, blob.end()};
  }

  static LoadAccount account(const CacheEntry& entry, double ssd_bytes_per_second) {
    if (!(ssd_bytes_per_second > 0.0)) throw ParameterError("ssd bandwidth must be positive");
    return {entry.byte_size, static_cast<double>(entry.byte_size) / ssd_bytes_per_second};
  }

 private:
  json manifest_json(const std::vector<CacheEntry>& entries) const {
    json arr = json::array();
    for (const auto& e : entries) {
      arr.push_back({{"key_hash", e.key_hash},
                     {"token_count", e.token_count},
                     {"byte_size", e.byte_size},
                     {"tag", to_string(e.tag)},
                     {"blob", e.blob_file},
                     {"checksum", e.checksum},
                     {"key", e.key}});
    }
    return {{"format", "agentaccel.kv_manifest/1"},
            {"geometry", geometry_.to_json()},
            {"kv_bytes_per_token", geometry_.kv_bytes_per_token()},
            {"total_bytes", [&] {
               std::uint64_t s = 0;
               for (const auto& e : entries) s += e.byte_size;
               return s;
             }()},
            {"entries", arr}};
  }

  void load_manifest(const fs::path& path) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw LoadError(path.string(), -1, "", e.what());
    }
    geometry_ = ModelGeometry::from_json(j.at("geometry"));
    long index = 0;
    for (const auto& ej : j.at("entries")) {
      CacheEntry e;
      try {
        e.key_hash = ej.at("key_hash").get<std::string>();
        e.token_count = ej.at("token_count").get<std::uint64_t>();
        e.byte_size = ej.at("byte_size").get<std::uint64_t>();
        e.tag = tag_from_string(ej.at("tag").get<std::string>());
        e.blob_file = ej.at("blob").get<std::string>();
        e.checksum = ej.at("checksum").get<std::string>();
        e.key = ej.at("key").get<TokenSequence>();
      } catch (const json::exception& ex) {
        throw LoadError(path.string(), index, "entries", ex.what());
      }
      if (e.key.size() != e.token_count || e.byte_size != kv_size(e.token_count, geometry_))
        throw LoadError(path.string(), index, "entries", "sizes disagree with key and geometry");
      entries_.push_back(std::move(e));
      ++index;
    }
    rebuild_index();
  }

  void rebuild_index() {
    std::vector<TokenSequence> keys;
    keys.reserve(entries_.size());
    for (const auto& e : entries_) keys.push_back(e.key);
    index_ = PrefixIndex(keys);
  }

  fs::path dir_;
  ModelGeometry geometry_;
  std::vector<CacheEntry> entries_;
  PrefixIndex index_;
};

}  // namespace agentaccel::kvstore
