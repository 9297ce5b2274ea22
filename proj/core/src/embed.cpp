#include "damr/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>

#include <json.hpp>

#include "damr/error.hpp"

namespace damr::embed {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::uint64_t h, unsigned char byte) { return (h ^ byte) * kFnvPrime; }

std::uint64_t hash_seed_text(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = kFnvOffset;
  for (int i = 0; i < 8; ++i) h = fnv1a(h, static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : text) h = fnv1a(h, static_cast<unsigned char>(c));
  return h;
}

// SplitMix64: fully specified integer arithmetic, so streams match everywhere.
struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

}  // namespace

Embedding stub_embed(std::uint64_t seed, std::string_view text, std::size_t dim) {
  if (dim < 1) throw_precondition("stub_embed: dimension must be >= 1");
  SplitMix64 gen{hash_seed_text(seed, text)};
  Embedding v(dim);
  double sum_sq = 0.0;
  do {
    sum_sq = 0.0;
    for (double& x : v) {
      const double unit = static_cast<double>(gen.next() >> 11) * 0x1.0p-53;
      x = 2.0 * unit - 1.0;
      sum_sq += x * x;
    }
  } while (sum_sq == 0.0);
  const double norm = std::sqrt(sum_sq);
  for (double& x : v) x /= norm;
  return v;
}

StubProvider::StubProvider(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
  if (dim < 1) throw InputError("stub provider dimension must be >= 1");
}

std::vector<Embedding> StubProvider::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(stub_embed(seed_, t, dim_));
  return out;
}

RemoteProvider::RemoteProvider(remote::RemoteConfig config, std::size_t dim)
    : client_(std::move(config)), dim_(dim) {}

std::vector<Embedding> RemoteProvider::embed(std::span<const std::string> texts) {
  nlohmann::json body = {{"model", client_.config().model}, {"input", texts}};
  ++calls_;
  const std::string raw = client_.post("/embeddings", body.dump());

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("embedding response is not JSON: ") + e.what());
  }
  if (!reply.contains("data") || !reply["data"].is_array() || reply["data"].size() != texts.size()) {
    throw ProtocolError("embedding response must carry one data item per input");
  }
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& item : reply["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw ProtocolError("embedding response item lacks an 'embedding' array");
    }
    Embedding v;
    v.reserve(item["embedding"].size());
    for (const auto& x : item["embedding"]) {
      if (!x.is_number()) throw ProtocolError("embedding contains a non-number");
      v.push_back(x.get<double>());
    }
    if (v.size() != dim_) {
      throw ProtocolError("embedding has " + std::to_string(v.size()) + " dims, expected " +
                          std::to_string(dim_));
    }
    out.push_back(std::move(v));
  }
  return out;
}

EmbeddingCache::EmbeddingCache(EmbeddingCache&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  map_ = std::move(other.map_);
}

EmbeddingPtr EmbeddingCache::find(const std::string& text) const {
  std::shared_lock lock(mutex_);
  auto it = map_.find(text);
  return it == map_.end() ? nullptr : it->second;
}

EmbeddingPtr EmbeddingCache::insert(const std::string& text, Embedding value) {
  auto ptr = std::make_shared<const Embedding>(std::move(value));
  std::unique_lock lock(mutex_);
  auto [it, inserted] = map_.try_emplace(text, std::move(ptr));
  return it->second;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return map_.size();
}

std::vector<std::pair<std::string, EmbeddingPtr>> EmbeddingCache::entries() const {
  std::vector<std::pair<std::string, EmbeddingPtr>> out;
  {
    std::shared_lock lock(mutex_);
    out.assign(map_.begin(), map_.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding cache " + path.string());
  for (const auto& [text, values] : entries()) {
    nlohmann::json record = {{"text", text}, {"values", *values}};
    out << record.dump() << '\n';
  }
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding cache " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EmbeddingCache cache;
  std::size_t line_no = 0;
  for (std::size_t begin = 0; begin < text.size();) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) {
      throw ParseError("embedding cache record " + where + " is truncated");
    }
    const std::string_view line(text.data() + begin, end - begin);
    begin = end + 1;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("embedding cache record " + where + " is corrupt: " + e.what());
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string() ||
        !record.contains("values") || !record["values"].is_array()) {
      throw ParseError("embedding cache record " + where + " lacks text/values");
    }
    Embedding values;
    for (const auto& x : record["values"]) {
      if (!x.is_number()) throw ParseError("embedding cache record " + where + " has a non-number");
      values.push_back(x.get<double>());
    }
    cache.insert(record["text"].get<std::string>(), std::move(values));
  }
  return cache;
}

EmbeddingPtr embed_text(EmbeddingProvider& provider, EmbeddingCache& cache, const std::string& text) {
  if (text.empty()) throw_precondition("embed_text: text must be non-empty");
  if (auto hit = cache.find(text)) {
    if (hit->size() != provider.dimension()) {
      throw ProtocolError("cached embedding for '" + text + "' has " +
                          std::to_string(hit->size()) + " dims, provider declares " +
                          std::to_string(provider.dimension()));
    }
    return hit;
  }
  const std::string batch[] = {text};
  auto fetched = provider.embed(batch);
  if (fetched.size() != 1 || fetched.front().size() != provider.dimension()) {
    throw ProtocolError("provider returned an embedding of the wrong dimension");
  }
  for (double x : fetched.front()) {
    if (!std::isfinite(x)) throw ProtocolError("provider returned a non-finite embedding");
  }
  return cache.insert(text, std::move(fetched.front()));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw_precondition("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace damr::embed
