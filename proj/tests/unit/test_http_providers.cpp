#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "shapnarr/http_providers.hpp"

using namespace shapnarr;

namespace {

// Local plain-http stand-in for a provider endpoint.
class FakeEndpoint {
 public:
  FakeEndpoint() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (status != 200) {
        res.status = status;
        res.set_content("{\"error\":\"nope\"}", "application/json");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"hi there"}}],"usage":{"prompt_tokens":12,"completion_tokens":3}})",
                      "application/json");
    });
    server_.Post("/v1/messages", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("x-api-key");
      res.set_content(R"({"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}],"usage":{"input_tokens":7,"output_tokens":2}})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  int status = 200;
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ChatRequest hello() {
  ChatRequest r;
  r.role_tag = PromptRole::narrator;
  r.body = "Write it.";
  r.temperature = 0.2;
  r.max_output_tokens = 99;
  r.model_id = "m";
  return r;
}

}  // namespace

TEST(HttpProvider, OpenAiShape) {
  FakeEndpoint ep;
  ::setenv("SHAPNARR_TEST_KEY", "sekrit", 1);
  HttpChatProvider p({WireFormat::openai_chat, ep.url(), "", "gpt-x", "SHAPNARR_TEST_KEY", std::chrono::seconds(5)});
  const auto r = p.complete(hello());
  EXPECT_EQ(r.body, "hi there");
  EXPECT_EQ(r.input_tokens, 12);
  EXPECT_EQ(r.output_tokens, 3);
  EXPECT_EQ(ep.last_auth, "Bearer sekrit");
  const auto sent = nlohmann::json::parse(ep.last_body);
  EXPECT_EQ(sent["model"], "gpt-x");
  EXPECT_EQ(sent["messages"][0]["content"], "Write it.");
  EXPECT_EQ(sent["max_tokens"], 99);
}

TEST(HttpProvider, AnthropicShape) {
  FakeEndpoint ep;
  ::setenv("SHAPNARR_TEST_KEY", "k2", 1);
  HttpChatProvider p({WireFormat::anthropic_messages, ep.url(), "", "claude-x", "SHAPNARR_TEST_KEY", std::chrono::seconds(5)});
  const auto r = p.complete(hello());
  EXPECT_EQ(r.body, "ab");
  EXPECT_EQ(r.input_tokens, 7);
  EXPECT_EQ(ep.last_auth, "k2");
}

TEST(HttpProvider, StatusClassification) {
  FakeEndpoint ep;
  ::setenv("SHAPNARR_TEST_KEY", "k", 1);
  HttpChatProvider p({WireFormat::openai_chat, ep.url(), "", "m", "SHAPNARR_TEST_KEY", std::chrono::seconds(5)});
  const std::pair<int, ErrorCode> cases[] = {{401, ErrorCode::AuthError},
                                             {429, ErrorCode::RateLimited},
                                             {503, ErrorCode::TransientError},
                                             {400, ErrorCode::ProviderError}};
  for (const auto& [status, code] : cases) {
    ep.status = status;
    try {
      p.complete(hello());
      FAIL() << status;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << status;
    }
  }
}

TEST(HttpProvider, MissingKeyIsAuthError) {
  ::unsetenv("SHAPNARR_NO_SUCH_KEY");
  HttpChatProvider p({WireFormat::openai_chat, "http://127.0.0.1:1", "", "m", "SHAPNARR_NO_SUCH_KEY", std::chrono::seconds(1)});
  try {
    p.complete(hello());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthError);
  }
}

TEST(HttpProvider, RetriedThroughGateway) {
  FakeEndpoint ep;
  ::setenv("SHAPNARR_TEST_KEY", "k", 1);
  ep.status = 503;
  int sleeps = 0;
  Gateway g({}, [&](std::chrono::milliseconds) {
    if (++sleeps == 2) ep.status = 200;
  });
  g.register_model("m", std::make_shared<HttpChatProvider>(
                            HttpProviderConfig{WireFormat::openai_chat, ep.url(), "", "m", "SHAPNARR_TEST_KEY", std::chrono::seconds(5)}));
  EXPECT_EQ(g.complete(hello()).body, "hi there");
  EXPECT_EQ(sleeps, 2);
}
