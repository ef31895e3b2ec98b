#include "chr/http_backends.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace chr {

using nlohmann::json;

ParsedUrl parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::InvalidArgument, "URL needs a scheme: '" + std::string(url) + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

std::string chat_request_body(std::string_view model, const GenerationRequest& request) {
  json body;
  body["model"] = model;
  body["messages"] = json::array();
  for (const auto& message : request.messages) {
    body["messages"].push_back({{"role", message.role}, {"content", message.content}});
  }
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

GenerationResponse parse_chat_response(std::string_view body) {
  const auto parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_object()) throw Error(Errc::BackendResponse, "response is not a JSON object");

  GenerationResponse response;
  if (const auto choices = parsed.find("choices");
      choices != parsed.end() && choices->is_array() && !choices->empty()) {
    const auto& first = choices->front();
    if (first.contains("message") && first["message"].contains("content") &&
        first["message"]["content"].is_string()) {
      response.text = first["message"]["content"].get<std::string>();
    } else if (first.contains("text") && first["text"].is_string()) {
      response.text = first["text"].get<std::string>();
    } else {
      throw Error(Errc::BackendResponse, "choice has no text content");
    }
  } else if (const auto text = parsed.find("text"); text != parsed.end() && text->is_string()) {
    response.text = text->get<std::string>();
  } else {
    throw Error(Errc::BackendResponse, "response carries no generated text");
  }

  if (const auto usage = parsed.find("usage"); usage != parsed.end() && usage->is_object()) {
    if (const auto tokens = usage->find("completion_tokens");
        tokens != usage->end() && tokens->is_number_unsigned()) {
      response.output_tokens = tokens->get<std::uint64_t>();
    }
  }
  return response;
}

std::string embedding_request_body(std::string_view model, std::string_view text) {
  return json{{"model", model}, {"input", text}}.dump();
}

Embedding parse_embedding_response(std::string_view body) {
  const auto parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  const json* values = nullptr;
  if (parsed.is_object()) {
    if (const auto data = parsed.find("data");
        data != parsed.end() && data->is_array() && !data->empty() &&
        data->front().contains("embedding")) {
      values = &data->front()["embedding"];
    } else if (const auto embedding = parsed.find("embedding"); embedding != parsed.end()) {
      values = &*embedding;
    }
  }
  if (values == nullptr || !values->is_array() || values->empty()) {
    throw Error(Errc::BackendResponse, "response carries no embedding array");
  }
  Embedding out(static_cast<Eigen::Index>(values->size()));
  for (std::size_t i = 0; i < values->size(); ++i) {
    if (!(*values)[i].is_number()) throw Error(Errc::BackendResponse, "non-numeric embedding value");
    out[static_cast<Eigen::Index>(i)] = (*values)[i].get<double>();
  }
  return out;
}

std::string post_json(const HttpEndpoint& endpoint, const std::string& body) {
  const auto url = parse_url(endpoint.url);
  httplib::Client client(url.scheme_host_port);
  if (!client.is_valid()) {
    throw Error(Errc::InvalidArgument, "unsupported endpoint URL '" + endpoint.url + "'");
  }
  const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  client.set_connection_timeout(timeout_s);
  client.set_read_timeout(timeout_s);
  client.set_write_timeout(timeout_s);

  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  std::string last_error;
  auto delay = endpoint.backoff;
  for (int attempt = 0; attempt <= endpoint.transport_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    const auto result = client.Post(url.path, headers, body, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      throw Error(Errc::BackendResponse,
                  "HTTP " + std::to_string(result->status) + " from " + endpoint.url);
    }
    return result->body;
  }
  throw Error(Errc::BackendUnavailable, endpoint.url + " after " +
                                            std::to_string(endpoint.transport_retries + 1) +
                                            " attempt(s): " + last_error);
}

HttpGenerator::HttpGenerator(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  parse_url(endpoint_.url);
}

GenerationResponse HttpGenerator::generate(const GenerationRequest& request) {
  return parse_chat_response(post_json(endpoint_, chat_request_body(endpoint_.model, request)));
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {
  parse_url(endpoint_.url);
}

Embedding HttpEmbedder::embed(std::string_view text) {
  Embedding embedding;
  try {
    embedding = parse_embedding_response(post_json(endpoint_, embedding_request_body(endpoint_.model, text)));
  } catch (const Error& e) {
    throw Error(Errc::EmbedderFailure, e.what());
  }
  if (dimension_ != 0 && static_cast<std::size_t>(embedding.size()) != dimension_) {
    throw Error(Errc::EmbedderFailure, "expected dimension " + std::to_string(dimension_) +
                                           ", got " + std::to_string(embedding.size()));
  }
  return embedding;
}

}  // namespace chr
