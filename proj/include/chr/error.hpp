#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chr {

enum class Errc {
  ZeroVector,
  DimensionMismatch,
  EmptyList,
  NonFinite,
  InvalidArgument,
  TooFewOptions,
  ParseFailure,
  BackendUnavailable,
  BackendResponse,
  EmbedderFailure,
  MissingEmbedding,
  EmptyCorpus,
  UnknownDocId,
  EmptyInput,
  NoQualifyingCases,
  UnknownItemId,
  MalformedLine,
  DuplicateId,
  InvalidAnswerKey,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  NormDrift,
  Io,
};

std::string_view to_string(Errc code) noexcept;

// Every failure in the library surfaces as chr::Error carrying a code.
// Line-oriented loaders also attach the 1-based line number.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  Error(Errc code, std::size_t line, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + " (line " + std::to_string(line) +
                           "): " + message),
        code_(code),
        line_(line),
        detail_(message) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }
  [[nodiscard]] std::optional<std::size_t> line() const noexcept { return line_; }
  // The message without the code and line prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

}  // namespace chr
