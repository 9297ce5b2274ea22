#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "damr/remote.hpp"

namespace damr::embed {

using Embedding = std::vector<double>;
using EmbeddingPtr = std::shared_ptr<const Embedding>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
  // One embedding per input text, in input order, each of dimension().
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

// Unit-norm vector of uniform [-1, 1] entries drawn from a generator seeded by
// hash(seed, text). Bit-identical on every IEEE-754 platform.
Embedding stub_embed(std::uint64_t seed, std::string_view text, std::size_t dim);

class StubProvider final : public EmbeddingProvider {
 public:
  StubProvider(std::uint64_t seed, std::size_t dim);

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "stub"; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

// POST <base>/embeddings, {"model", "input": [...]} -> {"data": [{"embedding"}]}.
class RemoteProvider final : public EmbeddingProvider {
 public:
  RemoteProvider(remote::RemoteConfig config, std::size_t dim);

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "remote:" + client_.config().model; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

  std::uint64_t remote_calls() const { return calls_.load(); }

 private:
  remote::JsonClient client_;
  std::size_t dim_;
  std::atomic<std::uint64_t> calls_{0};
};

// Thread-safe text -> embedding map. Keys are raw text, no normalization.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  EmbeddingCache(EmbeddingCache&& other) noexcept;
  EmbeddingCache& operator=(EmbeddingCache&&) = delete;

  EmbeddingPtr find(const std::string& text) const;
  // Returns the stored entry; an existing entry wins over `value`.
  EmbeddingPtr insert(const std::string& text, Embedding value);
  std::size_t size() const;
  // Snapshot sorted by text.
  std::vector<std::pair<std::string, EmbeddingPtr>> entries() const;

  // JSON lines: {"text": ..., "values": [...]}.
  void save(const std::filesystem::path& path) const;
  static EmbeddingCache load(const std::filesystem::path& path);

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EmbeddingPtr> map_;
};

// Cached-or-fetched embedding; validates dimension and finiteness.
EmbeddingPtr embed_text(EmbeddingProvider& provider, EmbeddingCache& cache, const std::string& text);

// Convenience pairing of a provider with its cache.
class Embedder {
 public:
  Embedder(EmbeddingProvider& provider, EmbeddingCache& cache)
      : provider_(&provider), cache_(&cache) {}

  EmbeddingPtr operator()(const std::string& text) const {
    return embed_text(*provider_, *cache_, text);
  }
  std::size_t dimension() const { return provider_->dimension(); }
  EmbeddingProvider& provider() const { return *provider_; }
  EmbeddingCache& cache() const { return *cache_; }

 private:
  EmbeddingProvider* provider_;
  EmbeddingCache* cache_;
};

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace damr::embed
