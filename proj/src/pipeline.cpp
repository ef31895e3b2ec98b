#include "chr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <thread>

namespace chr {

namespace {

std::int64_t steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::int64_t now_ms(const BenchmarkConfig& config) {
  return config.clock ? config.clock() : steady_ms();
}

bool is_letter_of(char c, std::span<const char> letters) {
  return std::ranges::find(letters, c) != letters.end();
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<char> answer_line_letter(std::string_view line, std::span<const char> letters) {
  const auto lowered = to_lower(line);
  const auto pos = lowered.find("answer");
  if (pos == std::string::npos) return std::nullopt;
  std::size_t i = pos + 6;
  while (i < line.size() && (line[i] == ' ' || line[i] == '*')) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  ++i;
  while (i < line.size() && (line[i] == ' ' || line[i] == '*' || line[i] == '(')) ++i;
  if (i >= line.size()) return std::nullopt;
  // After an explicit "Answer:" a lowercase letter is unambiguous.
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(line[i])));
  if (!is_letter_of(letter, letters)) return std::nullopt;
  if (i + 1 < line.size() && is_word_char(line[i + 1])) return std::nullopt;
  return letter;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (auto i = next++; i < n; i = next++) fn(i);
    });
  }
}

HypothesisPair strip_embeddings(HypothesisPair pair) {
  pair.h_plus_emb.reset();
  pair.h_minus_emb.reset();
  return pair;
}

}  // namespace

std::string build_answer_prompt(const QAItem& item, const RankedResult& hits, const Corpus& corpus) {
  if (hits.hits.empty()) throw Error(Errc::InvalidArgument, "answer prompt needs retrieved documents");
  std::string prompt = "Relevant documents:\n";
  std::size_t rank = 1;
  for (const auto& hit : hits.hits) {
    const auto index = corpus.find(hit.doc_id);
    if (!index) throw Error(Errc::UnknownDocId, "'" + hit.doc_id + "' is not in the corpus");
    prompt += "[Doc " + std::to_string(rank++) + "] " + corpus.text(*index) + "\n";
  }
  prompt += "\nQuestion: " + item.stem + "\nOptions:\n" + format_options(item) + "\n\n";
  prompt += kAnswerInstruction;
  return prompt;
}

std::string extract_answer(std::string_view raw, std::span<const char> letters) {
  std::size_t start = 0;
  while (start <= raw.size()) {
    const auto end = std::min(raw.find('\n', start), raw.size());
    if (const auto letter = answer_line_letter(raw.substr(start, end - start), letters)) {
      return std::string(1, *letter);
    }
    start = end + 1;
  }

  for (std::size_t i = 0; i + 2 < raw.size(); ++i) {
    if (raw[i] == '(' && raw[i + 2] == ')' && is_letter_of(raw[i + 1], letters)) {
      return std::string(1, raw[i + 1]);
    }
  }

  const auto first = raw.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && is_letter_of(raw[first], letters) &&
      (first + 1 == raw.size() || !std::isalpha(static_cast<unsigned char>(raw[first + 1])))) {
    return std::string(1, raw[first]);
  }
  return std::string(kAbstain);
}

void validate(const BenchmarkConfig& config) {
  if (!(config.lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be >= 0");
  if (config.k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (config.hyde_n == 0) throw Error(Errc::InvalidArgument, "hyde_n must be >= 1");
  if (config.max_retries < 0) throw Error(Errc::InvalidArgument, "max_retries must be >= 0");
}

Expansion expand(const QAItem& item, const BenchmarkConfig& config, Backends backends) {
  Expansion expansion;
  const auto started = now_ms(config);
  const GenerationOptions options{config.max_retries, config.temperature, config.seed};
  try {
    switch (config.method) {
      case Method::Standard:
        break;
      case Method::Hyde: {
        auto hyde_options = options;
        hyde_options.temperature = config.hyde_temperature;
        auto generated = generate_hyde_passages(item, backends.expander, config.hyde_n, hyde_options);
        expansion.passages = std::move(generated.texts);
        expansion.cost = generated.cost;
        break;
      }
      case Method::Query2Doc: {
        auto generated = generate_pseudo_doc(item, backends.expander, options);
        expansion.pseudo_doc = std::move(generated.texts.front());
        expansion.cost = generated.cost;
        break;
      }
      case Method::Chr:
      case Method::HPlusOnly: {
        auto generated = generate_pair(item, backends.expander, options);
        expansion.cost = generated.cost;
        expansion.pair = embed_pair(generated.pair, backends.embedder);
        break;
      }
    }
  } catch (const std::exception& e) {
    expansion.error = e.what();
  }
  expansion.cost.wall_ms = now_ms(config) - started;
  return expansion;
}

std::vector<Expansion> expand_all(std::span<const QAItem> dataset, const BenchmarkConfig& config,
                                  Backends backends) {
  validate(config);
  std::vector<Expansion> expansions(dataset.size());
  parallel_for(dataset.size(), config.jobs,
               [&](std::size_t i) { expansions[i] = expand(dataset[i], config, backends); });
  return expansions;
}

EvalRecord answer_item(const QAItem& item, const Expansion& expansion, const Corpus& corpus,
                       const BenchmarkConfig& config, Backends backends) {
  EvalRecord record;
  record.item_id = item.id;
  record.dataset = item.dataset;
  record.method = config.method;
  record.ranked.method = config.method;
  if (config.method == Method::Chr) {
    record.lambda = config.lambda;
    record.ranked.lambda = config.lambda;
  }
  if (expansion.pair) record.hypotheses = strip_embeddings(*expansion.pair);
  record.cost = expansion.cost;
  if (expansion.error) {
    record.error = expansion.error;
    return record;
  }

  const auto started = now_ms(config);
  try {
    switch (config.method) {
      case Method::Standard:
        record.ranked = retrieve_standard(item, corpus, config.k, backends.embedder, config.scan);
        break;
      case Method::Hyde:
        record.ranked = retrieve_hyde(expansion.passages, corpus, config.k, backends.embedder, config.scan);
        break;
      case Method::Query2Doc:
        record.ranked = retrieve_query2doc(item, expansion.pseudo_doc, corpus, config.k,
                                           backends.embedder, config.scan);
        break;
      case Method::Chr:
        record.ranked = retrieve_chr(*expansion.pair, corpus, config.lambda, config.k, config.scan);
        break;
      case Method::HPlusOnly:
        record.ranked = retrieve_h_plus_only(*expansion.pair, corpus, config.k, config.scan);
        break;
    }

    const Prompt prompt{std::string(kAnswerSystemPrompt), build_answer_prompt(item, record.ranked, corpus)};
    const auto response = backends.answerer.generate(make_request(prompt, 0.0, config.seed));
    record.answer_cost.llm_calls = 1;
    record.answer_cost.output_tokens = response.output_tokens.value_or(estimate_tokens(response.text));
    const auto letters = option_letters(item);
    record.predicted = extract_answer(response.text, letters);
    record.correct = item.answer_key.has_value() && record.predicted.size() == 1 &&
                     record.predicted.front() == *item.answer_key;
  } catch (const std::exception& e) {
    record.error = e.what();
    record.predicted = std::string(kAbstain);
    record.correct = false;
  }
  record.answer_cost.wall_ms = now_ms(config) - started;
  return record;
}

MethodSummary summarize(std::span<const EvalRecord> records) {
  MethodSummary summary;
  if (records.empty()) return summary;
  summary.method = records.front().method;
  summary.total = records.size();
  double calls = 0.0;
  double tokens = 0.0;
  for (const auto& record : records) {
    summary.correct += record.correct ? 1 : 0;
    summary.abstained += record.predicted == kAbstain ? 1 : 0;
    summary.errors += record.error ? 1 : 0;
    calls += static_cast<double>(record.cost.llm_calls);
    tokens += static_cast<double>(record.cost.output_tokens);
  }
  const auto n = static_cast<double>(summary.total);
  summary.accuracy = static_cast<double>(summary.correct) / n;
  summary.llm_calls_mean = calls / n;
  summary.output_tokens_mean = tokens / n;
  return summary;
}

BenchmarkRun run_with_expansions(std::span<const QAItem> dataset,
                                 std::span<const Expansion> expansions, const Corpus& corpus,
                                 const BenchmarkConfig& config, Backends backends) {
  validate(config);
  if (dataset.empty()) throw Error(Errc::EmptyInput, "dataset is empty");
  if (expansions.size() != dataset.size()) {
    throw Error(Errc::InvalidArgument, "one expansion per item is required");
  }
  BenchmarkRun run;
  run.records.resize(dataset.size());
  parallel_for(dataset.size(), config.jobs, [&](std::size_t i) {
    run.records[i] = answer_item(dataset[i], expansions[i], corpus, config, backends);
  });
  std::ranges::stable_sort(run.records, {}, &EvalRecord::item_id);
  run.summary = summarize(run.records);
  run.summary.method = config.method;
  return run;
}

BenchmarkRun run_benchmark(std::span<const QAItem> dataset, const Corpus& corpus,
                           const BenchmarkConfig& config, Backends backends) {
  if (dataset.empty()) throw Error(Errc::EmptyInput, "dataset is empty");
  const auto expansions = expand_all(dataset, config, backends);
  return run_with_expansions(dataset, expansions, corpus, config, backends);
}

double accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyInput, "accuracy of zero records");
  const auto correct = std::ranges::count_if(records, &EvalRecord::correct);
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

}  // namespace chr
