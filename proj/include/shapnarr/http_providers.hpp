#pragma once

// Live chat-completion adapters. Including this header pulls in cpp-httplib;
// define CPPHTTPLIB_OPENSSL_SUPPORT (and link OpenSSL) for https:// endpoints.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "shapnarr/llm_gateway.hpp"

namespace shapnarr {

enum class WireFormat { openai_chat, anthropic_messages };

struct HttpProviderConfig {
  WireFormat format = WireFormat::openai_chat;
  std::string base_url;     // scheme://host[:port]
  std::string path;         // empty -> format default
  std::string model;        // provider-side model name
  std::string api_key_env;  // environment variable holding the key
  std::chrono::seconds timeout{120};
};

inline std::string default_path(WireFormat f) {
  return f == WireFormat::openai_chat ? "/v1/chat/completions" : "/v1/messages";
}

inline std::string default_key_env(WireFormat f) {
  return f == WireFormat::openai_chat ? "OPENAI_API_KEY" : "ANTHROPIC_API_KEY";
}

namespace detail {

inline ErrorCode classify_http_status(int status) {
  if (status == 401 || status == 403) return ErrorCode::AuthError;
  if (status == 429) return ErrorCode::RateLimited;
  if (status == 408 || status == 504) return ErrorCode::Timeout;
  if (status >= 500) return ErrorCode::TransientError;
  return ErrorCode::ProviderError;
}

}  // namespace detail

class HttpChatProvider : public Provider {
 public:
  explicit HttpChatProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.path.empty()) cfg_.path = default_path(cfg_.format);
    if (cfg_.api_key_env.empty()) cfg_.api_key_env = default_key_env(cfg_.format);
  }

  std::string id() const override {
    return std::string(cfg_.format == WireFormat::openai_chat ? "openai:" : "anthropic:") + cfg_.model;
  }

  nlohmann::json request_payload(const ChatRequest& r) const {
    // Both wire formats accept the same minimal single-turn shape.
    nlohmann::json messages = nlohmann::json::array({{{"role", "user"}, {"content", r.body}}});
    return {{"model", cfg_.model},
            {"messages", messages},
            {"temperature", r.temperature},
            {"max_tokens", r.max_output_tokens}};
  }

  ChatResponse parse_reply(const std::string& text) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ProviderError, std::string("unparseable provider reply: ") + e.what());
    }
    ChatResponse out;
    out.provider_id = id();
    try {
      if (cfg_.format == WireFormat::openai_chat) {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        out.body = content.is_string() ? content.get<std::string>() : std::string{};
        if (j.contains("usage")) {
          out.input_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
          out.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        }
      } else {
        for (const auto& block : j.at("content"))
          if (block.value("type", "") == "text") out.body += block.value("text", "");
        if (j.contains("usage")) {
          out.input_tokens = j["usage"].value("input_tokens", std::int64_t{0});
          out.output_tokens = j["usage"].value("output_tokens", std::int64_t{0});
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ProviderError, std::string("unexpected provider reply shape: ") + e.what());
    }
    return out;
  }

  ChatResponse complete(const ChatRequest& r) override {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) throw Error(ErrorCode::AuthError, "environment variable " + cfg_.api_key_env + " is not set");

    httplib::Headers headers;
    if (cfg_.format == WireFormat::openai_chat) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    } else {
      headers.emplace("x-api-key", key);
      headers.emplace("anthropic-version", "2023-06-01");
    }

    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout);
    client.set_read_timeout(cfg_.timeout);
    client.set_write_timeout(cfg_.timeout);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(cfg_.path, headers, request_payload(r).dump(), "application/json");
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
      const auto err = res.error();
      const auto code = err == httplib::Error::Read || err == httplib::Error::Write ? ErrorCode::Timeout
                                                                                     : ErrorCode::TransientError;
      throw Error(code, "transport failure talking to " + cfg_.base_url + ": " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300)
      throw Error(detail::classify_http_status(res->status),
                  "HTTP " + std::to_string(res->status) + " from " + cfg_.base_url + ": " + res->body.substr(0, 300));
    auto out = parse_reply(res->body);
    out.latency_ms = elapsed;
    return out;
  }

 private:
  HttpProviderConfig cfg_;
};

}  // namespace shapnarr
