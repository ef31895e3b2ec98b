#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chr/backend.hpp"
#include "chr/cost.hpp"
#include "chr/embedding.hpp"

namespace chr {

struct QAItem {
  std::string id;
  std::string stem;
  std::map<char, std::string> options;  // letter -> option text, contiguous from 'A'
  std::optional<char> answer_key;
  std::string dataset;  // grouping label for per-dataset report rows; may be empty

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

// Throws TooFewOptions, InvalidArgument (letters not contiguous from 'A')
// or InvalidAnswerKey.
void validate(const QAItem& item);

std::vector<char> option_letters(const QAItem& item);

// "(A) text" lines joined by '\n'.
std::string format_options(const QAItem& item);

enum class Provenance { Llm, Fallback, Injected };

std::string_view to_string(Provenance provenance) noexcept;
Provenance provenance_from_string(std::string_view name);

struct HypothesisPair {
  std::string h_plus;
  std::string h_minus;  // empty for fallback pairs
  std::optional<Embedding> h_plus_emb;
  std::optional<Embedding> h_minus_emb;
  Provenance provenance = Provenance::Llm;
};

struct Prompt {
  std::string system;
  std::string user;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

GenerationRequest make_request(const Prompt& prompt, double temperature,
                               std::optional<std::uint64_t> seed);

namespace prompts {

extern const std::string_view kSpecialistSystem;
extern const std::string_view kContrastiveUserTemplate;
extern const std::string_view kHydeUserTemplate;
extern const std::string_view kQuery2DocUserTemplate;

// Markers the in-process mock uses to tell prompt kinds apart.
extern const std::string_view kContrastiveMarker;
extern const std::string_view kHydeMarker;
extern const std::string_view kQuery2DocMarker;

}  // namespace prompts

// Contrastive H+/H- prompt. Throws TooFewOptions.
Prompt render_prompt(const QAItem& item);

// Single-passage prompt used to sample HyDE hypothetical documents.
Prompt render_hyde_prompt(const QAItem& item);

// Query2Doc pseudo-document prompt. Sees the stem only.
Prompt render_query2doc_prompt(const QAItem& item);

// First JSON object in `raw` with a nonempty string "H_plus". Tolerates
// surrounding prose and ``` fences. Throws ParseFailure.
HypothesisPair parse_pair(std::string_view raw);

// {"H_plus": ..., "H_minus": ...}
std::string serialize_pair(const HypothesisPair& pair);

struct GenerationOptions {
  int max_retries = 2;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

struct GeneratedPair {
  HypothesisPair pair;
  CostEntry cost;  // wall_ms left at 0; the caller owns the clock
};

// One backend call per attempt, at most 1 + max_retries attempts. After the
// last ParseFailure the raw text becomes H+ with an empty H- (fallback).
// BackendUnavailable propagates.
GeneratedPair generate_pair(const QAItem& item, GeneratorBackend& backend,
                            const GenerationOptions& options = {});

struct GeneratedTexts {
  std::vector<std::string> texts;
  CostEntry cost;
};

// `n` HyDE passages; sample i is requested with seed (seed + i).
GeneratedTexts generate_hyde_passages(const QAItem& item, GeneratorBackend& backend,
                                      std::size_t n, const GenerationOptions& options);

GeneratedTexts generate_pseudo_doc(const QAItem& item, GeneratorBackend& backend,
                                   const GenerationOptions& options);

// Returns a new pair with normalized embeddings; no h_minus_emb when h_minus
// is empty. Embedder errors surface as EmbedderFailure.
HypothesisPair embed_pair(const HypothesisPair& pair, EmbedderBackend& embedder);

// Embeds and normalizes one text, mapping any embedder error to EmbedderFailure.
Embedding embed_text(EmbedderBackend& embedder, std::string_view text);

}  // namespace chr
