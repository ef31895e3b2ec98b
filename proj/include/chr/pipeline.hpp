#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chr/backend.hpp"
#include "chr/cost.hpp"
#include "chr/hypothesis.hpp"
#include "chr/retrieval.hpp"

namespace chr {

inline constexpr std::string_view kAbstain = "abstain";
inline constexpr std::string_view kAnswerPromptVersion = "answer-v1";
inline constexpr std::string_view kAnswerSystemPrompt =
    "You are a medical expert answering multiple-choice questions from retrieved evidence.";
inline constexpr std::string_view kAnswerInstruction =
    "Answer with the single letter of the correct option, in the form \"Answer: X\".";

struct EvalRecord {
  std::string item_id;
  std::string dataset;
  Method method = Method::Standard;
  std::optional<double> lambda;
  std::optional<HypothesisPair> hypotheses;  // texts and provenance only
  RankedResult ranked;
  std::string predicted = std::string(kAbstain);  // option letter or "abstain"
  bool correct = false;
  CostEntry cost;         // query-expansion stage
  CostEntry answer_cost;  // answer generation
  std::optional<std::string> error;
};

// Documents as "[Doc i] text" in rank order, then the stem, the lettered
// options and the fixed single-letter instruction. Throws UnknownDocId and
// InvalidArgument for an empty hit list.
std::string build_answer_prompt(const QAItem& item, const RankedResult& hits, const Corpus& corpus);

// Priority: an "Answer: X" line, then "(X)", then a bare leading letter.
// Returns the letter as a one-character string, or "abstain".
std::string extract_answer(std::string_view raw, std::span<const char> letters);

struct Backends {
  GeneratorBackend& expander;  // query-expansion LLM
  GeneratorBackend& answerer;  // answer generator
  EmbedderBackend& embedder;
};

struct BenchmarkConfig {
  Method method = Method::Chr;
  double lambda = kDefaultLambda;
  std::size_t k = kDefaultTopK;
  std::size_t hyde_n = 8;
  int max_retries = 2;
  double temperature = 0.0;
  double hyde_temperature = 0.7;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;  // items processed concurrently
  ScanOptions scan;
  // Milliseconds since an arbitrary epoch; feeds CostEntry::wall_ms.
  std::function<std::int64_t()> clock;
};

void validate(const BenchmarkConfig& config);

// Expansion-stage output for one item, reusable across scoring configurations.
struct Expansion {
  std::optional<HypothesisPair> pair;  // embedded; chr and h_plus_only
  std::vector<std::string> passages;   // hyde
  std::string pseudo_doc;              // query2doc
  CostEntry cost;
  std::optional<std::string> error;
};

Expansion expand(const QAItem& item, const BenchmarkConfig& config, Backends backends);

std::vector<Expansion> expand_all(std::span<const QAItem> dataset, const BenchmarkConfig& config,
                                  Backends backends);

// Retrieval + answer generation for one item given its expansion.
EvalRecord answer_item(const QAItem& item, const Expansion& expansion, const Corpus& corpus,
                       const BenchmarkConfig& config, Backends backends);

struct MethodSummary {
  Method method = Method::Standard;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t abstained = 0;
  std::size_t errors = 0;
  double accuracy = 0.0;
  double llm_calls_mean = 0.0;
  double output_tokens_mean = 0.0;

  friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

MethodSummary summarize(std::span<const EvalRecord> records);

struct BenchmarkRun {
  std::vector<EvalRecord> records;  // sorted by item_id
  MethodSummary summary;
};

// Records come back sorted by item_id. Per-item failures are recorded in the
// record and never abort the run.
BenchmarkRun run_with_expansions(std::span<const QAItem> dataset,
                                 std::span<const Expansion> expansions, const Corpus& corpus,
                                 const BenchmarkConfig& config, Backends backends);

BenchmarkRun run_benchmark(std::span<const QAItem> dataset, const Corpus& corpus,
                           const BenchmarkConfig& config, Backends backends);

// Fraction correct. Throws EmptyInput.
double accuracy(std::span<const EvalRecord> records);

}  // namespace chr
