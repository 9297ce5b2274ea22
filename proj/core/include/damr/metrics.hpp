#pragma once

#include <span>
#include <string>

namespace damr::harness {

double hits_at_1(std::span<const std::string> ranked, std::span<const std::string> gold);
double f1(std::span<const std::string> predicted, std::span<const std::string> gold);

}  // namespace damr::harness
