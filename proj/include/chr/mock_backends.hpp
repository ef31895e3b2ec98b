#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chr/backend.hpp"
#include "chr/hypothesis.hpp"

namespace chr {

// Lowercased alphanumeric tokens with common English stopwords removed.
std::vector<std::string> tokenize(std::string_view text);

// Seeded hash-to-vector embedder. Each token maps to a fixed pseudo-random
// direction; a text embeds as the (unnormalized) sum of its token vectors, so
// cosine similarity tracks token overlap. Text without word tokens embeds as
// one token made of the whole trimmed text; blank text fails with
// EmbedderFailure.
class HashEmbedder final : public EmbedderBackend {
 public:
  explicit HashEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0);

  Embedding embed(std::string_view text) override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::atomic<std::size_t> calls_{0};
};

// Generator driven by an arbitrary rule; counts calls. Thread-safe as long as
// the rule is.
class FunctionGenerator final : public GeneratorBackend {
 public:
  using Rule = std::function<GenerationResponse(const GenerationRequest&)>;

  explicit FunctionGenerator(Rule rule) : rule_(std::move(rule)) {}

  GenerationResponse generate(const GenerationRequest& request) override;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Rule rule_;
  std::atomic<std::size_t> calls_{0};
};

enum class PromptKind { Contrastive, Hyde, Query2Doc, Answer, Unknown };

PromptKind classify_prompt(const GenerationRequest& request);

// Content of the last user message, or empty.
std::string_view user_message(const GenerationRequest& request);

// Stem embedded in a rendered prompt ("Question: ..." or "Query: ...").
std::optional<std::string> prompt_question(std::string_view user_text);

// Canned expansion output for one question.
struct ScriptEntry {
  std::string h_plus;
  std::string h_minus;
  std::vector<std::string> passages;  // HyDE samples, picked by request seed
  std::string pseudo_doc;
};

// Deterministic, rule-driven stand-in for a chat endpoint. Recognizes every
// prompt this library renders:
//  - contrastive prompts answer with the scripted H+/H- JSON,
//  - HyDE and Query2Doc prompts answer with scripted passages,
//  - answer prompts pick the option mentioned most often in the documents.
// Questions without a script entry get generic text derived from the prompt.
class ScriptedGenerator final : public GeneratorBackend {
 public:
  explicit ScriptedGenerator(std::map<std::string, ScriptEntry> by_question = {});

  GenerationResponse generate(const GenerationRequest& request) override;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::map<std::string, ScriptEntry> by_question_;
  std::atomic<std::size_t> calls_{0};
};

// "Answer: X" for the option mentioned most often in the [Doc i] context.
GenerationResponse answer_from_evidence(std::string_view user_text);

// Always answers with the item's answer key.
std::unique_ptr<FunctionGenerator> make_oracle_answerer(const std::vector<QAItem>& dataset);
// Always answers with the first option letter that is not the answer key.
std::unique_ptr<FunctionGenerator> make_adversarial_answerer(const std::vector<QAItem>& dataset);
// Replies with the same text to everything.
std::unique_ptr<FunctionGenerator> make_constant_generator(std::string text);

}  // namespace chr
