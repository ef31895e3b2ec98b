#include "chr/mock_backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "chr/pipeline.hpp"
#include "json.hpp"

namespace chr {

namespace {

const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a",     "an",    "and",  "are",   "as",    "at",    "be",   "by",   "for",  "from",
      "has",   "have",  "he",   "her",   "his",   "in",    "is",   "it",   "its",  "of",
      "on",    "or",    "she",  "that",  "the",   "their", "them", "they", "this", "to",
      "was",   "were",  "which", "with", "what",  "who",   "whom", "most", "likely", "following",
      "these", "those", "than", "then",  "there", "been",  "being", "also", "but",  "not",
      "into",  "over",  "may",  "can",   "will",  "would", "should", "does", "did", "do"};
  return words;
}

constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string lower(std::string_view text) {
  std::string out(text);
  std::ranges::transform(out, out.begin(),
                         [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string between(std::string_view text, std::string_view open, std::string_view close) {
  const auto begin = text.find(open);
  if (begin == std::string_view::npos) return {};
  const auto start = begin + open.size();
  const auto end = text.find(close, start);
  return std::string(text.substr(start, end == std::string_view::npos ? text.npos : end - start));
}

// (letter, text) pairs from "(X) text" lines following "Options:".
std::vector<std::pair<char, std::string>> prompt_options(std::string_view user_text) {
  std::vector<std::pair<char, std::string>> options;
  const auto start = user_text.find("Options:\n");
  if (start == std::string_view::npos) return options;
  auto rest = user_text.substr(start + 9);
  while (rest.size() >= 4 && rest[0] == '(' && std::isupper(static_cast<unsigned char>(rest[1])) &&
         rest[2] == ')' && rest[3] == ' ') {
    const auto eol = rest.find('\n');
    const auto line = rest.substr(4, eol == std::string_view::npos ? rest.npos : eol - 4);
    options.emplace_back(rest[1], std::string(line));
    if (eol == std::string_view::npos) break;
    rest = rest.substr(eol + 1);
  }
  return options;
}

std::string generic_passage(std::string_view question, std::size_t sample) {
  return "Clinical passage " + std::to_string(sample) + ": " + std::string(question);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty() && !stopwords().contains(current)) tokens.push_back(current);
    current.clear();
  };
  for (const char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current += static_cast<char>(std::tolower(u));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw Error(Errc::InvalidArgument, "embedder dimension must be positive");
}

Embedding HashEmbedder::embed(std::string_view text) {
  ++calls_;
  auto tokens = tokenize(text);
  if (tokens.empty()) {
    // Punctuation or stopwords only: hash the trimmed text as one token.
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) throw Error(Errc::EmbedderFailure, "text is blank");
    const auto last = text.find_last_not_of(" \t\r\n");
    tokens.emplace_back(text.substr(first, last - first + 1));
  }

  Embedding sum = Embedding::Zero(static_cast<Eigen::Index>(dimension_));
  for (const auto& token : tokens) {
    std::uint64_t state = fnv1a(token, 0xcbf29ce484222325ULL ^ seed_);
    for (Eigen::Index i = 0; i < sum.size(); ++i) {
      // 53 random bits mapped onto [-1, 1).
      const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      sum[i] += 2.0 * u - 1.0;
    }
  }
  return sum;
}

GenerationResponse FunctionGenerator::generate(const GenerationRequest& request) {
  ++calls_;
  return rule_(request);
}

std::string_view user_message(const GenerationRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return {};
}

PromptKind classify_prompt(const GenerationRequest& request) {
  const auto user = user_message(request);
  if (user.find(prompts::kContrastiveMarker) != std::string_view::npos) return PromptKind::Contrastive;
  if (user.find(prompts::kHydeMarker) != std::string_view::npos) return PromptKind::Hyde;
  if (user.find(prompts::kQuery2DocMarker) != std::string_view::npos) return PromptKind::Query2Doc;
  if (user.find("[Doc 1]") != std::string_view::npos &&
      user.find(kAnswerInstruction) != std::string_view::npos) {
    return PromptKind::Answer;
  }
  return PromptKind::Unknown;
}

std::optional<std::string> prompt_question(std::string_view user_text) {
  if (const auto q = user_text.find("\nQuestion: ");
      q != std::string_view::npos || user_text.starts_with("Question: ")) {
    const std::string_view open = q == std::string_view::npos ? "Question: " : "\nQuestion: ";
    return between(user_text, open, "\nOptions:");
  }
  if (user_text.find("Query: ") != std::string_view::npos) {
    return between(user_text, "Query: ", "\nPassage:");
  }
  return std::nullopt;
}

GenerationResponse answer_from_evidence(std::string_view user_text) {
  const auto context = lower(between(user_text, "[Doc 1]", "\nQuestion: "));
  const auto options = prompt_options(user_text);

  std::optional<char> best;
  std::size_t best_count = 0;
  for (const auto& [letter, text] : options) {
    const auto count = count_occurrences(context, lower(text));
    if (count > best_count) {
      best = letter;
      best_count = count;
    }
  }
  if (!best) return {"The retrieved evidence does not settle this question.", std::nullopt};
  return {"Answer: " + std::string(1, *best), std::nullopt};
}

ScriptedGenerator::ScriptedGenerator(std::map<std::string, ScriptEntry> by_question)
    : by_question_(std::move(by_question)) {}

GenerationResponse ScriptedGenerator::generate(const GenerationRequest& request) {
  ++calls_;
  const auto user = user_message(request);
  const auto kind = classify_prompt(request);
  if (kind == PromptKind::Answer) return answer_from_evidence(user);
  if (kind == PromptKind::Unknown) return {"", std::nullopt};

  const auto question = prompt_question(user).value_or("");
  const auto it = by_question_.find(question);
  const ScriptEntry* entry = it == by_question_.end() ? nullptr : &it->second;
  const auto sample = static_cast<std::size_t>(request.seed.value_or(0));

  switch (kind) {
    case PromptKind::Contrastive: {
      nlohmann::ordered_json out;
      if (entry) {
        out["H_plus"] = entry->h_plus;
        out["H_minus"] = entry->h_minus;
      } else {
        const auto options = prompt_options(user);
        const auto pick = fnv1a(question, 0xcbf29ce484222325ULL) % std::max<std::size_t>(options.size(), 1);
        const auto& target = options.empty() ? question : options[pick].second;
        const auto& mimic = options.empty() ? question : options[(pick + 1) % options.size()].second;
        out["H_plus"] = "Findings that point to " + target + " in: " + question;
        out["H_minus"] = "Features suggesting " + mimic + " that should be ruled out.";
      }
      return {out.dump(), std::nullopt};
    }
    case PromptKind::Hyde:
      if (entry && !entry->passages.empty()) {
        return {entry->passages[sample % entry->passages.size()], std::nullopt};
      }
      return {generic_passage(question, sample), std::nullopt};
    case PromptKind::Query2Doc:
      if (entry && !entry->pseudo_doc.empty()) return {entry->pseudo_doc, std::nullopt};
      return {"Background: " + question, std::nullopt};
    default:
      return {"", std::nullopt};
  }
}

namespace {

std::unordered_map<std::string, char> letter_by_question(
    const std::vector<QAItem>& dataset, const std::function<std::optional<char>(const QAItem&)>& pick) {
  std::unordered_map<std::string, char> table;
  for (const auto& item : dataset) {
    if (const auto letter = pick(item)) table.emplace(item.stem, *letter);
  }
  return table;
}

std::unique_ptr<FunctionGenerator> make_table_answerer(std::unordered_map<std::string, char> table) {
  return std::make_unique<FunctionGenerator>(
      [table = std::move(table)](const GenerationRequest& request) -> GenerationResponse {
        const auto question = prompt_question(user_message(request));
        if (!question) return {"", std::nullopt};
        const auto it = table.find(*question);
        if (it == table.end()) return {"I do not know.", std::nullopt};
        return {"Answer: " + std::string(1, it->second), std::nullopt};
      });
}

}  // namespace

std::unique_ptr<FunctionGenerator> make_oracle_answerer(const std::vector<QAItem>& dataset) {
  return make_table_answerer(
      letter_by_question(dataset, [](const QAItem& item) { return item.answer_key; }));
}

std::unique_ptr<FunctionGenerator> make_adversarial_answerer(const std::vector<QAItem>& dataset) {
  return make_table_answerer(letter_by_question(dataset, [](const QAItem& item) -> std::optional<char> {
    for (const auto& entry : item.options) {
      if (!item.answer_key || entry.first != *item.answer_key) return entry.first;
    }
    return std::nullopt;
  }));
}

std::unique_ptr<FunctionGenerator> make_constant_generator(std::string text) {
  return std::make_unique<FunctionGenerator>(
      [text = std::move(text)](const GenerationRequest&) -> GenerationResponse {
        return {text, std::nullopt};
      });
}

}  // namespace chr
