#include <atomic>
#include <chrono>
#include <thread>

#include "chr/error.hpp"
#include "chr/http_backends.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace chr;
using nlohmann::json;

namespace {

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected chr::Error");
  return Errc::Io;
}

// In-process server on an ephemeral port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  httplib::Server& server() { return server_; }
  [[nodiscard]] std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpEndpoint endpoint_for(const std::string& url) {
  HttpEndpoint e;
  e.url = url;
  e.model = "test-model";
  e.api_key = "secret";
  e.timeout = std::chrono::milliseconds(2000);
  e.backoff = std::chrono::milliseconds(0);
  return e;
}

}  // namespace

TEST_CASE("wire format helpers") {
  GenerationRequest request{{{"system", "sys"}, {"user", "hi"}}, 0.5, 9};
  const auto body = json::parse(chat_request_body("m", request));
  CHECK(body["model"] == "m");
  CHECK(body["messages"].size() == 2);
  CHECK(body["messages"][1]["content"] == "hi");
  CHECK(body["temperature"] == 0.5);
  CHECK(body["seed"] == 9);
  CHECK_FALSE(json::parse(chat_request_body("m", {{{"user", "x"}}, 0.0, std::nullopt})).contains("seed"));

  const auto reply = parse_chat_response(R"({"choices":[{"message":{"content":"ok"}}],"usage":{"completion_tokens":4}})");
  CHECK(reply.text == "ok");
  CHECK(reply.output_tokens == 4u);
  CHECK(parse_chat_response(R"({"choices":[{"text":"legacy"}]})").text == "legacy");
  CHECK(code_of([] { parse_chat_response("not json"); }) == Errc::BackendResponse);
  CHECK(code_of([] { parse_chat_response(R"({"choices":[]})"); }) == Errc::BackendResponse);

  CHECK(parse_embedding_response(R"({"data":[{"embedding":[1,2]}]})").size() == 2);
  CHECK(parse_embedding_response(R"({"embedding":[1,2,3]})").size() == 3);
  CHECK(code_of([] { parse_embedding_response(R"({"data":[]})"); }) == Errc::BackendResponse);

  const auto parsed = parse_url("https://api.example.com:8443/v1/chat");
  CHECK(parsed.scheme_host_port == "https://api.example.com:8443");
  CHECK(parsed.path == "/v1/chat");
}

TEST_CASE("refused connection surfaces BackendUnavailable after retries") {
  auto endpoint = endpoint_for("http://127.0.0.1:1/v1/chat/completions");
  endpoint.timeout = std::chrono::milliseconds(500);
  HttpGenerator generator(endpoint);
  CHECK(code_of([&] { generator.generate({{{"user", "x"}}, 0.0, std::nullopt}); }) == Errc::BackendUnavailable);
}

TEST_CASE("generator and embedder against a local server") {
  LocalServer local;
  std::atomic<int> chat_calls{0};
  std::atomic<int> flaky_calls{0};
  std::string seen_auth;
  local.server().Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
    ++chat_calls;
    seen_auth = req.get_header_value("Authorization");
    const auto body = json::parse(req.body);
    json reply = {{"choices", {{{"message", {{"content", "echo " + body["messages"].back()["content"].get<std::string>()}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  local.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (++flaky_calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"finally"}}],"usage":{"completion_tokens":2}})", "application/json");
  });
  local.server().Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  local.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    CHECK(body["model"] == "test-model");
    res.set_content(R"({"data":[{"embedding":[3.0, 4.0]}]})", "application/json");
  });

  HttpGenerator chat(endpoint_for(local.url("/chat")));
  const auto out = chat.generate({{{"user", "ping"}}, 0.0, 1});
  CHECK(out.text == "echo ping");
  CHECK_FALSE(out.output_tokens);
  CHECK(seen_auth == "Bearer secret");

  HttpGenerator flaky(endpoint_for(local.url("/flaky")));
  const auto recovered = flaky.generate({{{"user", "x"}}, 0.0, std::nullopt});
  CHECK(recovered.text == "finally");
  CHECK(recovered.output_tokens == 2u);
  CHECK(flaky_calls == 3);

  HttpGenerator bad(endpoint_for(local.url("/bad")));
  CHECK(code_of([&] { bad.generate({{{"user", "x"}}, 0.0, std::nullopt}); }) == Errc::BackendResponse);

  HttpEmbedder embedder(endpoint_for(local.url("/embed")), 2);
  const auto v = embedder.embed("anything");
  CHECK(v.size() == 2);
  HttpEmbedder wrong_dim(endpoint_for(local.url("/embed")), 3);
  CHECK(code_of([&] { wrong_dim.embed("x"); }) == Errc::EmbedderFailure);
}
