#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace damr::harness {

struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;
  std::vector<std::string> answers;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

// JSON lines: {"id", "question", "topic_entities": [...], "answers": [...]}.
std::vector<QAItem> load_dataset(const std::filesystem::path& path);
std::vector<QAItem> parse_dataset(std::string_view text);
void save_dataset(const std::vector<QAItem>& items, const std::filesystem::path& path);

}  // namespace damr::harness
