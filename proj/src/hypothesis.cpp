#include "chr/hypothesis.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

namespace chr {

namespace prompts {

const std::string_view kSpecialistSystem =
    "You are a medical specialist assisting with complex clinical decision-making. Your goal is "
    "to generate precise diagnostic hypotheses to guide an evidence-based search engine. Ensure "
    "all outputs are in strict JSON format.";

const std::string_view kContrastiveUserTemplate =
    "Analyze the clinical scenario below and generate two conflicting hypotheses for retrieval:\n"
    "\n"
    "1. H_plus (Target Hypothesis): Describe the pathophysiology, distinct symptoms, or "
    "gold-standard treatment for the CORRECT diagnosis. Focus on specific details that "
    "differentiate it from other conditions.\n"
    "\n"
    "2. H_minus (Mimic Hypothesis): Describe the primary differential diagnosis or closest mimic "
    "that is INCORRECT. Explain why a clinician might mistakenly consider this condition due to "
    "overlapping symptoms, but specify the subtle features that rule it out.\n"
    "\n"
    "Question: {question}\n"
    "Options:\n"
    "{options}\n"
    "\n"
    "Output Requirement:\n"
    "Return ONLY a JSON object with keys \"H_plus\" and \"H_minus\".\n"
    "{\"H_plus\": \"...\", \"H_minus\": \"...\"}";

const std::string_view kHydeUserTemplate =
    "Analyze the clinical scenario below and write a short passage for retrieval.\n"
    "\n"
    "Describe the pathophysiology, distinct symptoms, or gold-standard treatment for the CORRECT "
    "diagnosis. Focus on specific details that differentiate it from other conditions.\n"
    "\n"
    "Question: {question}\n"
    "Options:\n"
    "{options}\n"
    "\n"
    "Passage:";

const std::string_view kQuery2DocUserTemplate =
    "Write a passage that answers the given query.\n"
    "\n"
    "Query: {question}\n"
    "Passage:";

const std::string_view kContrastiveMarker = "H_plus (Target Hypothesis)";
const std::string_view kHydeMarker = "write a short passage for retrieval";
const std::string_view kQuery2DocMarker = "Write a passage that answers the given query";

}  // namespace prompts

namespace {

// Single pass, so placeholder-like text inside the stem or options is kept verbatim.
std::string fill(std::string_view tmpl, const QAItem& item) {
  constexpr std::string_view kQuestion = "{question}";
  constexpr std::string_view kOptions = "{options}";
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto rest = tmpl.substr(pos);
    if (rest.starts_with(kQuestion)) {
      out += item.stem;
      pos += kQuestion.size();
    } else if (rest.starts_with(kOptions)) {
      out += format_options(item);
      pos += kOptions.size();
    } else {
      out += tmpl[pos++];
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

// End of the balanced {...} starting at `open`, honoring JSON string escapes.
std::optional<std::size_t> matching_brace(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::nullopt;
}

std::uint64_t response_tokens(const GenerationResponse& response) {
  return response.output_tokens.value_or(estimate_tokens(response.text));
}

std::optional<std::uint64_t> offset_seed(std::optional<std::uint64_t> seed, std::uint64_t k) {
  if (!seed) return std::nullopt;
  return *seed + k;
}

}  // namespace

std::uint64_t estimate_tokens(std::string_view text) noexcept {
  const auto chars = static_cast<std::uint64_t>(std::count_if(
      text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
  return (chars + 3) / 4;
}

void validate(const QAItem& item) {
  if (item.options.size() < 2) {
    throw Error(Errc::TooFewOptions, "item '" + item.id + "' has " +
                                         std::to_string(item.options.size()) + " option(s)");
  }
  if (item.options.size() > 26) throw Error(Errc::InvalidArgument, "more than 26 options");
  char expected = 'A';
  for (const auto& [letter, text] : item.options) {
    if (letter != expected) {
      throw Error(Errc::InvalidArgument,
                  "option letters must be contiguous from 'A' in item '" + item.id + "'");
    }
    ++expected;
  }
  if (item.answer_key && !item.options.contains(*item.answer_key)) {
    throw Error(Errc::InvalidAnswerKey, "answer '" + std::string(1, *item.answer_key) +
                                            "' is not an option of item '" + item.id + "'");
  }
}

std::vector<char> option_letters(const QAItem& item) {
  std::vector<char> letters;
  letters.reserve(item.options.size());
  for (const auto& entry : item.options) letters.push_back(entry.first);
  return letters;
}

std::string format_options(const QAItem& item) {
  std::string out;
  for (const auto& [letter, text] : item.options) {
    if (!out.empty()) out += '\n';
    out += '(';
    out += letter;
    out += ") ";
    out += text;
  }
  return out;
}

std::string_view to_string(Provenance provenance) noexcept {
  switch (provenance) {
    case Provenance::Llm: return "llm";
    case Provenance::Fallback: return "fallback";
    case Provenance::Injected: return "injected";
  }
  return "llm";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "llm") return Provenance::Llm;
  if (name == "fallback") return Provenance::Fallback;
  if (name == "injected") return Provenance::Injected;
  throw Error(Errc::InvalidArgument, "unknown provenance '" + std::string(name) + "'");
}

GenerationRequest make_request(const Prompt& prompt, double temperature,
                               std::optional<std::uint64_t> seed) {
  GenerationRequest request;
  request.messages = {{"system", prompt.system}, {"user", prompt.user}};
  request.temperature = temperature;
  request.seed = seed;
  return request;
}

Prompt render_prompt(const QAItem& item) {
  if (item.options.size() < 2) {
    throw Error(Errc::TooFewOptions, "contrastive prompt needs at least 2 options");
  }
  return {std::string(prompts::kSpecialistSystem), fill(prompts::kContrastiveUserTemplate, item)};
}

Prompt render_hyde_prompt(const QAItem& item) {
  if (item.options.size() < 2) {
    throw Error(Errc::TooFewOptions, "HyDE prompt needs at least 2 options");
  }
  return {std::string(prompts::kSpecialistSystem), fill(prompts::kHydeUserTemplate, item)};
}

Prompt render_query2doc_prompt(const QAItem& item) {
  return {"You are a helpful medical expert.", fill(prompts::kQuery2DocUserTemplate, item)};
}

HypothesisPair parse_pair(std::string_view raw) {
  for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto close = matching_brace(raw, open);
    if (!close) continue;
    const auto parsed =
        nlohmann::json::parse(raw.substr(open, *close - open + 1), nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_object()) continue;

    const auto plus = parsed.find("H_plus");
    if (plus == parsed.end() || !plus->is_string()) continue;
    HypothesisPair pair;
    // Texts are kept verbatim; a blank H_minus counts as absent.
    pair.h_plus = plus->get<std::string>();
    if (trim(pair.h_plus).empty()) continue;

    const auto minus = parsed.find("H_minus");
    if (minus != parsed.end() && minus->is_string() && !trim(minus->get_ref<const std::string&>()).empty()) {
      pair.h_minus = minus->get<std::string>();
    }
    pair.provenance = Provenance::Llm;
    return pair;
  }
  throw Error(Errc::ParseFailure, "no JSON object with a nonempty \"H_plus\" string");
}

std::string serialize_pair(const HypothesisPair& pair) {
  nlohmann::ordered_json out;
  out["H_plus"] = pair.h_plus;
  out["H_minus"] = pair.h_minus;
  return out.dump();
}

GeneratedPair generate_pair(const QAItem& item, GeneratorBackend& backend,
                            const GenerationOptions& options) {
  const Prompt prompt = render_prompt(item);
  const int attempts = 1 + std::max(options.max_retries, 0);

  GeneratedPair result;
  std::string last_raw;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const auto response = backend.generate(
        make_request(prompt, options.temperature, offset_seed(options.seed, attempt)));
    ++result.cost.llm_calls;
    result.cost.output_tokens += response_tokens(response);
    try {
      result.pair = parse_pair(response.text);
      return result;
    } catch (const Error& e) {
      if (e.code() != Errc::ParseFailure) throw;
      last_raw = response.text;
    }
  }

  const auto raw = trim(last_raw);
  result.pair = HypothesisPair{};
  result.pair.h_plus = raw.empty() ? item.stem : std::string(raw);
  result.pair.provenance = Provenance::Fallback;
  return result;
}

GeneratedTexts generate_hyde_passages(const QAItem& item, GeneratorBackend& backend,
                                      std::size_t n, const GenerationOptions& options) {
  if (n == 0) throw Error(Errc::InvalidArgument, "HyDE needs at least one passage");
  const Prompt prompt = render_hyde_prompt(item);
  GeneratedTexts result;
  result.texts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto response =
        backend.generate(make_request(prompt, options.temperature, offset_seed(options.seed, i)));
    ++result.cost.llm_calls;
    result.cost.output_tokens += response_tokens(response);
    result.texts.push_back(response.text);
  }
  return result;
}

GeneratedTexts generate_pseudo_doc(const QAItem& item, GeneratorBackend& backend,
                                   const GenerationOptions& options) {
  const auto response =
      backend.generate(make_request(render_query2doc_prompt(item), options.temperature, options.seed));
  GeneratedTexts result;
  result.cost.llm_calls = 1;
  result.cost.output_tokens = response_tokens(response);
  result.texts.push_back(response.text);
  return result;
}

Embedding embed_text(EmbedderBackend& embedder, std::string_view text) {
  try {
    return normalize(embedder.embed(text));
  } catch (const Error& e) {
    if (e.code() == Errc::EmbedderFailure) throw;
    throw Error(Errc::EmbedderFailure, e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::EmbedderFailure, e.what());
  }
}

HypothesisPair embed_pair(const HypothesisPair& pair, EmbedderBackend& embedder) {
  if (pair.h_plus.empty()) throw Error(Errc::InvalidArgument, "H+ text is empty");
  HypothesisPair out = pair;
  out.h_plus_emb = embed_text(embedder, pair.h_plus);
  if (pair.h_minus.empty()) {
    out.h_minus_emb.reset();
  } else {
    out.h_minus_emb = embed_text(embedder, pair.h_minus);
  }
  return out;
}

}  // namespace chr
