#include "damr/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "damr/error.hpp"

namespace damr::checkpoint {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'A', 'M', 'R', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

nlohmann::json dims_json(const scorer::ScorerDims& d) {
  return {{"d_in", d.d_in}, {"d", d.d},         {"layers", d.layers},
          {"heads", d.heads}, {"d_ff", d.d_ff}, {"l_max", d.l_max}};
}

}  // namespace

void save_checkpoint(const scorer::ScorerParams& params, const std::filesystem::path& path) {
  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.tensors()) {
    manifest.push_back({{"name", name}, {"shape", {t->rows(), t->cols()}}, {"offset", offset}});
    for (Eigen::Index i = 0; i < t->rows(); ++i) {
      for (Eigen::Index j = 0; j < t->cols(); ++j) put_u64(payload, std::bit_cast<std::uint64_t>((*t)(i, j)));
    }
    offset += static_cast<std::uint64_t>(t->size());
  }
  const std::string header =
      nlohmann::json{{"format", 1}, {"dims", dims_json(params.dims)}, {"tensors", manifest}}.dump();

  std::string blob(kMagic.begin(), kMagic.end());
  put_u64(blob, header.size());
  blob += header;
  blob += payload;

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("short write to checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

scorer::ScorerParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint " + path.string() + ": ";

  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError(where + "bad magic");
  }
  const std::uint64_t header_len = get_u64(blob.data() + 8);
  if (header_len > blob.size() - 16) throw CheckpointError(where + "truncated header");

  scorer::ScorerDims dims;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
    const auto& d = header.at("dims");
    dims.d_in = d.at("d_in").get<std::size_t>();
    dims.d = d.at("d").get<std::size_t>();
    dims.layers = d.at("layers").get<std::size_t>();
    dims.heads = d.at("heads").get<std::size_t>();
    dims.d_ff = d.at("d_ff").get<std::size_t>();
    dims.l_max = d.at("l_max").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + "bad header: " + e.what());
  }
  try {
    dims.validate();
  } catch (const InputError& e) {
    throw CheckpointError(where + e.what());
  }

  scorer::ScorerParams params = scorer::zeros_like(dims);
  auto tensors = params.tensors();
  const auto& manifest = header.at("tensors");
  if (!manifest.is_array() || manifest.size() != tensors.size()) {
    throw CheckpointError(where + "tensor manifest does not match dims");
  }
  const char* payload = blob.data() + 16 + header_len;
  const std::uint64_t payload_doubles = (blob.size() - 16 - header_len) / 8;
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, t] = tensors[i];
    const auto& entry = manifest[i];
    try {
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      if (entry.at("name").get<std::string>() != name || shape.size() != 2 || shape[0] != t->rows() ||
          shape[1] != t->cols() || entry.at("offset").get<std::uint64_t>() != expected) {
        throw CheckpointError(where + "tensor '" + name + "' disagrees with the header dims");
      }
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(where + "bad manifest entry: " + e.what());
    }
    const auto count = static_cast<std::uint64_t>(t->size());
    if (expected + count > payload_doubles) throw CheckpointError(where + "payload truncated");
    const char* at = payload + expected * 8;
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c, at += 8) {
        (*t)(r, c) = std::bit_cast<double>(get_u64(at));
      }
    }
    expected += count;
  }
  if (expected * 8 != blob.size() - 16 - header_len) {
    throw CheckpointError(where + "payload size does not match the manifest");
  }
  return params;
}

}  // namespace damr::checkpoint
