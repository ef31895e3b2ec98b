#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chr/embedding.hpp"

namespace chr {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

struct GenerationResponse {
  std::string text;
  std::optional<std::uint64_t> output_tokens;  // backend-reported usage, when available
};

// Chat-completion style text generator. Implementations must be safe to call
// from several threads at once.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

// Text -> fixed-dimension vector. Output need not be normalized.
class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;
  virtual Embedding embed(std::string_view text) = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
};

}  // namespace chr
