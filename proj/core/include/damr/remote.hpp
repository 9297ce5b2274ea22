#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

namespace damr::remote {

// Connection settings for an OpenAI-compatible HTTP API.
struct RemoteConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  int max_in_flight = 4;
  std::chrono::seconds timeout{60};

  // Reads DAMR_API_BASE and DAMR_API_KEY.
  static RemoteConfig from_env(std::string model);
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// POSTs JSON bodies with bearer auth, bounded concurrency and retry with
// exponential backoff. Throws ProviderError once all attempts fail.
class JsonClient {
 public:
  explicit JsonClient(RemoteConfig config);
  ~JsonClient();
  JsonClient(const JsonClient&) = delete;
  JsonClient& operator=(const JsonClient&) = delete;

  // `path` is appended to the base URL's path prefix. Returns the body of the
  // first 2xx response.
  std::string post(std::string_view path, const std::string& json_body);

  const RemoteConfig& config() const { return config_; }

 private:
  struct Impl;
  RemoteConfig config_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace damr::remote
