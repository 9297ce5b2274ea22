#include "damr/remote.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <spdlog/spdlog.h>

#include "damr/error.hpp"

namespace damr::remote {

RemoteConfig RemoteConfig::from_env(std::string model) {
  RemoteConfig config;
  if (const char* base = std::getenv("DAMR_API_BASE")) config.base_url = base;
  if (const char* key = std::getenv("DAMR_API_KEY")) config.api_key = key;
  config.model = std::move(model);
  return config;
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError("base URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.prefix = url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

}  // namespace

struct JsonClient::Impl {
  SplitUrl url;
  std::counting_semaphore<64> in_flight;

  explicit Impl(const RemoteConfig& config)
      : url(split_url(config.base_url)),
        in_flight(std::clamp(config.max_in_flight, 1, 64)) {}
};

JsonClient::JsonClient(RemoteConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_)) {
  if (config_.max_attempts < 1) throw InputError("max_attempts must be >= 1");
}

JsonClient::~JsonClient() = default;

std::string JsonClient::post(std::string_view path, const std::string& json_body) {
  const std::string target = impl_->url.prefix + std::string(path);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    {
      impl_->in_flight.acquire();
      struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
      } release{impl_->in_flight};

      httplib::Client client(impl_->url.origin);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      auto res = client.Post(target, headers, json_body, "application/json");
      if (res && res->status >= 200 && res->status < 300) return res->body;
      if (res) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      } else {
        last_error = "transport error: " + httplib::to_string(res.error());
      }
    }
    spdlog::warn("POST {} attempt {}/{} failed: {}", target, attempt, config_.max_attempts,
                 last_error);
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw ProviderError("POST " + target + " failed after " + std::to_string(config_.max_attempts) +
                      " attempts: " + last_error);
}

}  // namespace damr::remote
