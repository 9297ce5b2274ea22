#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "damr/embed.hpp"
#include "damr/scorer.hpp"
#include "damr/training.hpp"

namespace damr::testkit {

// Small dimensions that keep finite differences and property loops fast.
scorer::ScorerDims small_dims();

embed::EmbeddingPtr random_embedding(std::mt19937_64& rng, std::size_t dim);

std::vector<embed::EmbeddingPtr> random_path(std::mt19937_64& rng, std::size_t dim,
                                             std::size_t length);

// Triplets with independent random paths of lengths 1..max_len.
std::vector<training::TrainTriplet> random_batch(std::mt19937_64& rng, std::size_t dim,
                                                 std::size_t size, std::size_t max_len);

// Stub provider plus its cache, ready to hand out an Embedder.
struct StubEmbedding {
  explicit StubEmbedding(std::size_t dim, std::uint64_t seed = 0) : provider(seed, dim) {}

  embed::Embedder embedder() { return {provider, cache}; }

  embed::StubProvider provider;
  embed::EmbeddingCache cache;
};

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace damr::testkit
