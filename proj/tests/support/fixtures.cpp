#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace damr::testkit {

scorer::ScorerDims small_dims() {
  scorer::ScorerDims d;
  d.d_in = 12;
  d.d = 8;
  d.layers = 2;
  d.heads = 2;
  d.d_ff = 16;
  d.l_max = 6;
  return d;
}

embed::EmbeddingPtr random_embedding(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  embed::Embedding v(dim);
  for (auto& x : v) x = n(rng);
  return std::make_shared<const embed::Embedding>(std::move(v));
}

std::vector<embed::EmbeddingPtr> random_path(std::mt19937_64& rng, std::size_t dim,
                                             std::size_t length) {
  std::vector<embed::EmbeddingPtr> out;
  for (std::size_t i = 0; i < length; ++i) out.push_back(random_embedding(rng, dim));
  return out;
}

std::vector<training::TrainTriplet> random_batch(std::mt19937_64& rng, std::size_t dim,
                                                 std::size_t size, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::vector<training::TrainTriplet> out;
  for (std::size_t i = 0; i < size; ++i) {
    auto q = random_embedding(rng, dim);
    auto pos = random_path(rng, dim, len(rng));
    auto neg = random_path(rng, dim, len(rng));
    out.push_back({std::move(q), std::move(pos), std::move(neg)});
  }
  return out;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("damr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace damr::testkit
