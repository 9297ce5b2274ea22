#include "damr/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "damr/error.hpp"

namespace damr::harness {

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* field,
                                     const std::string& where) {
  if (!j.contains(field)) throw ParseError(where + "missing field '" + field + "'");
  const auto& v = j.at(field);
  if (!v.is_array()) throw ParseError(where + "field '" + field + "' must be an array");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw ParseError(where + "field '" + field + "' must hold strings");
    out.push_back(x.get<std::string>());
  }
  if (out.empty()) throw ParseError(where + "field '" + field + "' must be non-empty");
  return out;
}

std::string string_field(const nlohmann::json& j, const char* field, const std::string& where) {
  if (!j.contains(field)) throw ParseError(where + "missing field '" + field + "'");
  if (!j.at(field).is_string()) throw ParseError(where + "field '" + field + "' must be a string");
  return j.at(field).get<std::string>();
}

}  // namespace

std::vector<QAItem> parse_dataset(std::string_view text) {
  std::vector<QAItem> items;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
    if (!j.is_object()) throw ParseError(where + "expected a JSON object");
    items.push_back({string_field(j, "id", where), string_field(j, "question", where),
                     string_list(j, "topic_entities", where), string_list(j, "answers", where)});
  }
  return items;
}

std::vector<QAItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void save_dataset(const std::vector<QAItem>& items, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset " + path.string());
  for (const auto& item : items) {
    nlohmann::json j = {{"id", item.id},
                        {"question", item.question},
                        {"topic_entities", item.topic_entities},
                        {"answers", item.answers}};
    out << j.dump() << '\n';
  }
}

}  // namespace damr::harness
