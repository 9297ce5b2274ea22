#pragma once

#include <filesystem>

#include "damr/scorer.hpp"

namespace damr::checkpoint {

// "DAMRCKPT", u64 header length, JSON header {dims, tensors: [{name, shape,
// offset}]}, then every tensor as little-endian float64 in row-major order.
void save_checkpoint(const scorer::ScorerParams& params, const std::filesystem::path& path);
scorer::ScorerParams load_checkpoint(const std::filesystem::path& path);

}  // namespace damr::checkpoint
