#pragma once

// Requires linking against OpenSSL when CPPHTTPLIB_OPENSSL_SUPPORT is defined
// (https endpoints); plain http works without it.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "tailext/curation.hpp"
#include "tailext/error.hpp"

namespace tailext {

/// "scheme://host[:port]" and path prefix of an endpoint URL.
struct Endpoint {
  std::string origin;
  std::string path;
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  e.path = slash == std::string::npos ? std::string{} : url.substr(slash);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  if (e.origin.rfind("https://", 0) == 0) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    throw ConfigError("https endpoints need a build with OpenSSL support");
#endif
  } else if (e.origin.rfind("http://", 0) != 0) {
    throw ConfigError("unsupported URL scheme in '" + url + "'");
  }
  return e;
}

struct HttpClientOptions {
  std::string base_url;  ///< e.g. http://localhost:8000/v1
  std::string api_key;   ///< sent as a bearer token when non-empty
  std::string model = "default";
  double temperature = 0.0;
  std::chrono::seconds timeout{60};
};

/// Reads TAILEXT_LLM_URL and TAILEXT_LLM_KEY (and optionally TAILEXT_LLM_MODEL).
inline std::optional<HttpClientOptions> llm_options_from_env() {
  const char* url = std::getenv("TAILEXT_LLM_URL");
  if (url == nullptr || *url == '\0') return std::nullopt;
  HttpClientOptions o;
  o.base_url = url;
  if (const char* key = std::getenv("TAILEXT_LLM_KEY")) o.api_key = key;
  if (const char* model = std::getenv("TAILEXT_LLM_MODEL"); model != nullptr && *model != '\0') o.model = model;
  return o;
}

namespace detail {

inline nlohmann::json post_json(const HttpClientOptions& opt, const std::string& route, const nlohmann::json& body) {
  const auto ep = split_url(opt.base_url);
  httplib::Client cli(ep.origin);
  cli.set_connection_timeout(opt.timeout);
  cli.set_read_timeout(opt.timeout);
  cli.set_write_timeout(opt.timeout);
  httplib::Headers headers;
  if (!opt.api_key.empty()) headers.emplace("Authorization", "Bearer " + opt.api_key);
  const auto res = cli.Post(ep.path + route, headers, body.dump(), "application/json");
  if (!res) throw ServiceError("request to " + opt.base_url + route + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ServiceError("request to " + opt.base_url + route + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError("non-JSON response from " + opt.base_url + route + ": " + e.what());
  }
}

}  // namespace detail

/// Chat-completion client: POST {base_url}/chat/completions with a single
/// user message, answer read from choices[0].message.content.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpClientOptions options) : options_(std::move(options)) {
    split_url(options_.base_url);  // validate early
  }

  std::string complete(const std::string& prompt) override {
    const nlohmann::json body{{"model", options_.model},
                              {"temperature", options_.temperature},
                              {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    const auto j = detail::post_json(options_, "/chat/completions", body);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(std::string("unexpected chat-completion payload: ") + e.what());
    }
  }

 private:
  HttpClientOptions options_;
};

/// Embedding endpoint: POST {base_url}/embeddings with the candidate's
/// image_ref and caption, vector read from data[0].embedding.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpClientOptions options) : options_(std::move(options)) { split_url(options_.base_url); }

  std::vector<double> embed(const Candidate& c) override {
    const nlohmann::json body{{"model", options_.model}, {"image_ref", c.image_ref}, {"input", c.caption}};
    const auto j = detail::post_json(options_, "/embeddings", body);
    try {
      return j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(std::string("unexpected embedding payload: ") + e.what());
    }
  }

 private:
  HttpClientOptions options_;
};

}  // namespace tailext
