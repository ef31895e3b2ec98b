#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>

#include "chr/backend.hpp"

namespace chr {

struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string model;
  std::string api_key;  // sent as "Authorization: Bearer <key>" when nonempty
  std::chrono::milliseconds timeout{60000};
  int transport_retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
};

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(std::string_view url);

// OpenAI-compatible wire format: {model, messages:[{role, content}], temperature[, seed]}.
std::string chat_request_body(std::string_view model, const GenerationRequest& request);
// choices[0].message.content (or "text"), plus usage.completion_tokens when present.
GenerationResponse parse_chat_response(std::string_view body);

std::string embedding_request_body(std::string_view model, std::string_view text);
// data[0].embedding, or a top-level "embedding" array.
Embedding parse_embedding_response(std::string_view body);

// Connection failures, 429 and 5xx are retried with backoff; once retries are
// exhausted the call fails with BackendUnavailable. Other HTTP errors and
// malformed bodies fail with BackendResponse.
class HttpGenerator final : public GeneratorBackend {
 public:
  explicit HttpGenerator(HttpEndpoint endpoint);
  GenerationResponse generate(const GenerationRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpEmbedder final : public EmbedderBackend {
 public:
  HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension);
  Embedding embed(std::string_view text) override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }

 private:
  HttpEndpoint endpoint_;
  std::size_t dimension_;
};

// POSTs `body` as JSON and returns the response body, applying the retry policy above.
std::string post_json(const HttpEndpoint& endpoint, const std::string& body);

}  // namespace chr
