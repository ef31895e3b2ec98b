#include "chr/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace chr {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---- files ---------------------------------------------------------------------

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot open '" + partial.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(Errc::Io, "write to '" + partial.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(partial, path, ec);
  if (ec) throw Error(Errc::Io, "cannot move '" + partial.string() + "' into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

namespace {

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(number, line);
  }
}

json parse_object_line(std::size_t number, const std::string& line) {
  auto parsed = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_object()) throw Error(Errc::MalformedLine, number, "not a JSON object");
  return parsed;
}

const std::string& string_field(const json& object, const char* key, std::size_t line) {
  const auto it = object.find(key);
  if (it == object.end() || !it->is_string()) {
    throw Error(Errc::MalformedLine, line, std::string("missing string field \"") + key + "\"");
  }
  return it->get_ref<const std::string&>();
}

// ---- little-endian primitives --------------------------------------------------

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(static_cast<std::uint64_t>(value) >> (8 * i) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }

  std::string_view take(std::size_t n) {
    need(n);
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(Errc::TruncatedFile, "needed " + std::to_string(n) + " more byte(s) at offset " +
                                           std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

constexpr std::array<char, 4> kMagic = {'C', 'H', 'R', 'E'};

}  // namespace

// ---- cache ---------------------------------------------------------------------

void write_cache(const fs::path& path, std::span<const CacheEntry> entries) {
  const std::size_t dim = entries.empty() ? 0 : static_cast<std::size_t>(entries.front().embedding.size());
  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kCacheVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put_le<std::uint64_t>(out, entries.size());
  for (const auto& entry : entries) {
    if (static_cast<std::size_t>(entry.embedding.size()) != dim) {
      throw Error(Errc::DimensionMismatch, "cache entry '" + entry.id + "' has dimension " +
                                               std::to_string(entry.embedding.size()));
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entry.id.size()));
    out += entry.id;
    const Eigen::VectorXf narrowed = normalize(entry.embedding).cast<float>();
    for (const float value : narrowed) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(value));
  }
  write_file_atomic(path, out);
}

std::vector<CacheEntry> load_cache(const fs::path& path) {
  const auto bytes = read_file(path);
  Reader reader(bytes);
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(Errc::BadMagic, "'" + path.string() + "' is not an embedding cache");
  }
  reader.take(kMagic.size());
  const auto version = reader.get_le<std::uint32_t>();
  if (version != kCacheVersion) {
    throw Error(Errc::VersionMismatch, "cache version " + std::to_string(version) + ", expected " +
                                           std::to_string(kCacheVersion));
  }
  const auto dim = reader.get_le<std::uint32_t>();
  const auto count = reader.get_le<std::uint64_t>();

  std::vector<CacheEntry> entries;
  entries.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, bytes.size())));
  for (std::uint64_t i = 0; i < count; ++i) {
    CacheEntry entry;
    const auto id_length = reader.get_le<std::uint32_t>();
    entry.id = std::string(reader.take(id_length));
    entry.embedding.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) {
      entry.embedding[d] = static_cast<double>(std::bit_cast<float>(reader.get_le<std::uint32_t>()));
    }
    if (!entry.embedding.allFinite() || std::abs(entry.embedding.norm() - 1.0) > kCacheNormTolerance) {
      throw Error(Errc::NormDrift, "cache entry '" + entry.id + "' has norm " +
                                       std::to_string(entry.embedding.norm()));
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

// ---- corpus --------------------------------------------------------------------

Corpus load_corpus(const fs::path& path, EmbedderBackend* embedder,
                   const std::optional<fs::path>& cache_path) {
  struct Pending {
    std::size_t line;
    std::size_t index;
  };
  std::vector<Document> documents;
  std::vector<Pending> pending;
  std::unordered_set<std::string> seen;
  std::optional<std::size_t> dimension;

  const auto check_dimension = [&](std::size_t dim, std::size_t line) {
    if (!dimension) dimension = dim;
    if (dim != *dimension) {
      throw Error(Errc::DimensionMismatch, line, "dimension " + std::to_string(dim) + ", expected " +
                                                     std::to_string(*dimension));
    }
  };

  for_each_line(path, [&](std::size_t line, const std::string& text) {
    const auto object = parse_object_line(line, text);
    Document doc;
    doc.id = string_field(object, "id", line);
    doc.text = string_field(object, "text", line);
    if (!seen.insert(doc.id).second) {
      throw Error(Errc::DuplicateId, line, "document id '" + doc.id + "' repeated");
    }
    if (const auto emb = object.find("embedding"); emb != object.end() && !emb->is_null()) {
      if (!emb->is_array() || emb->empty()) {
        throw Error(Errc::MalformedLine, line, "\"embedding\" must be a nonempty array");
      }
      doc.embedding.resize(static_cast<Eigen::Index>(emb->size()));
      for (std::size_t i = 0; i < emb->size(); ++i) {
        if (!(*emb)[i].is_number()) throw Error(Errc::MalformedLine, line, "non-numeric embedding value");
        doc.embedding[static_cast<Eigen::Index>(i)] = (*emb)[i].get<double>();
      }
      check_dimension(emb->size(), line);
      try {
        doc.embedding = normalize(doc.embedding);
      } catch (const Error& e) {
        throw Error(e.code(), line, e.detail());
      }
    } else {
      pending.push_back({line, documents.size()});
    }
    documents.push_back(std::move(doc));
  });

  if (!pending.empty()) {
    std::unordered_map<std::string, Embedding> cached;
    if (cache_path && fs::exists(*cache_path)) {
      for (auto& entry : load_cache(*cache_path)) cached.emplace(std::move(entry.id), std::move(entry.embedding));
    }
    bool cache_dirty = false;
    for (const auto& p : pending) {
      auto& doc = documents[p.index];
      if (const auto it = cached.find(doc.id);
          it != cached.end() && (!dimension || static_cast<std::size_t>(it->second.size()) == *dimension)) {
        doc.embedding = it->second;
      } else {
        if (embedder == nullptr) {
          throw Error(Errc::MissingEmbedding, p.line, "document '" + doc.id + "' has no embedding and no embedder is configured");
        }
        doc.embedding = embed_text(*embedder, doc.text);
        cached[doc.id] = doc.embedding;
        cache_dirty = true;
      }
      check_dimension(static_cast<std::size_t>(doc.embedding.size()), p.line);
    }
    if (cache_path && cache_dirty) {
      std::vector<CacheEntry> entries;
      entries.reserve(cached.size());
      for (const auto& [id, embedding] : cached) {
        if (!dimension || static_cast<std::size_t>(embedding.size()) == *dimension) entries.push_back({id, embedding});
      }
      std::ranges::sort(entries, {}, &CacheEntry::id);
      write_cache(*cache_path, entries);
    }
  }
  return Corpus(std::move(documents));
}

// ---- dataset -------------------------------------------------------------------

std::vector<QAItem> load_dataset(const fs::path& path) {
  std::vector<QAItem> items;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](std::size_t line, const std::string& text) {
    const auto object = parse_object_line(line, text);
    QAItem item;
    item.id = string_field(object, "id", line);
    item.stem = string_field(object, "question", line);
    if (const auto ds = object.find("dataset"); ds != object.end() && ds->is_string()) {
      item.dataset = ds->get<std::string>();
    }
    const auto options = object.find("options");
    if (options == object.end() || !options->is_object()) {
      throw Error(Errc::MalformedLine, line, "missing object field \"options\"");
    }
    for (const auto& [letter, option] : options->items()) {
      if (letter.size() != 1 || !option.is_string()) {
        throw Error(Errc::MalformedLine, line, "options must map single letters to strings");
      }
      item.options.emplace(letter.front(), option.get<std::string>());
    }
    if (const auto answer = object.find("answer"); answer != object.end() && !answer->is_null()) {
      if (!answer->is_string() || answer->get_ref<const std::string&>().size() != 1) {
        throw Error(Errc::InvalidAnswerKey, line, "answer must be a single letter");
      }
      item.answer_key = answer->get_ref<const std::string&>().front();
    }
    try {
      validate(item);
    } catch (const Error& e) {
      throw Error(e.code() == Errc::InvalidAnswerKey ? Errc::InvalidAnswerKey : Errc::MalformedLine, line, e.detail());
    }
    if (!seen.insert(item.id).second) throw Error(Errc::DuplicateId, line, "item id '" + item.id + "' repeated");
    items.push_back(std::move(item));
  });
  return items;
}

void save_dataset(const fs::path& path, std::span<const QAItem> items) {
  std::string out;
  for (const auto& item : items) {
    ojson object;
    object["id"] = item.id;
    object["question"] = item.stem;
    object["options"] = ojson::object();
    for (const auto& [letter, text] : item.options) object["options"][std::string(1, letter)] = text;
    if (item.answer_key) object["answer"] = std::string(1, *item.answer_key);
    if (!item.dataset.empty()) object["dataset"] = item.dataset;
    out += object.dump() + "\n";
  }
  write_file_atomic(path, out);
}

// ---- records -------------------------------------------------------------------

namespace {

ojson cost_to_json(const CostEntry& cost) {
  return {{"llm_calls", cost.llm_calls}, {"output_tokens", cost.output_tokens}, {"wall_ms", cost.wall_ms}};
}

CostEntry cost_from_json(const json& in) {
  return {in.at("llm_calls").get<std::uint64_t>(), in.at("output_tokens").get<std::uint64_t>(),
          in.at("wall_ms").get<std::int64_t>()};
}

}  // namespace

std::string record_to_json_line(const EvalRecord& record) {
  ojson out;
  out["item_id"] = record.item_id;
  out["dataset"] = record.dataset;
  out["method"] = to_string(record.method);
  out["lambda"] = record.lambda ? ojson(*record.lambda) : ojson(nullptr);
  if (record.hypotheses) {
    out["hypotheses"] = {{"h_plus", record.hypotheses->h_plus},
                         {"h_minus", record.hypotheses->h_minus},
                         {"provenance", to_string(record.hypotheses->provenance)}};
  } else {
    out["hypotheses"] = nullptr;
  }
  out["hits"] = ojson::array();
  for (const auto& hit : record.ranked.hits) out["hits"].push_back({{"doc_id", hit.doc_id}, {"score", hit.score}});
  out["predicted"] = record.predicted;
  out["correct"] = record.correct;
  out["cost"] = cost_to_json(record.cost);
  out["answer_cost"] = cost_to_json(record.answer_cost);
  out["error"] = record.error ? ojson(*record.error) : ojson(nullptr);
  return out.dump();
}

EvalRecord record_from_json_line(std::string_view line) {
  const auto in = json::parse(line);
  EvalRecord record;
  record.item_id = in.at("item_id").get<std::string>();
  record.dataset = in.value("dataset", "");
  record.method = method_from_string(in.at("method").get<std::string>());
  if (!in.at("lambda").is_null()) record.lambda = in["lambda"].get<double>();
  if (const auto& h = in.at("hypotheses"); !h.is_null()) {
    HypothesisPair pair;
    pair.h_plus = h.at("h_plus").get<std::string>();
    pair.h_minus = h.at("h_minus").get<std::string>();
    pair.provenance = provenance_from_string(h.at("provenance").get<std::string>());
    record.hypotheses = std::move(pair);
  }
  record.ranked.method = record.method;
  record.ranked.lambda = record.lambda;
  for (const auto& hit : in.at("hits")) {
    record.ranked.hits.push_back({hit.at("doc_id").get<std::string>(), hit.at("score").get<double>()});
  }
  record.predicted = in.at("predicted").get<std::string>();
  record.correct = in.at("correct").get<bool>();
  record.cost = cost_from_json(in.at("cost"));
  record.answer_cost = cost_from_json(in.at("answer_cost"));
  if (!in.at("error").is_null()) record.error = in["error"].get<std::string>();
  return record;
}

void write_records(const fs::path& path, std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& record : records) out += record_to_json_line(record) + "\n";
  write_file_atomic(path, out);
}

std::vector<EvalRecord> load_records(const fs::path& path) {
  std::vector<EvalRecord> records;
  for_each_line(path, [&](std::size_t line, const std::string& text) {
    try {
      records.push_back(record_from_json_line(text));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedLine, line, e.what());
    }
  });
  return records;
}

std::string summaries_to_json(std::span<const MethodSummary> summaries) {
  ojson out;
  out["methods"] = ojson::array();
  for (const auto& s : summaries) {
    out["methods"].push_back({{"method", to_string(s.method)},
                              {"total", s.total},
                              {"correct", s.correct},
                              {"abstained", s.abstained},
                              {"errors", s.errors},
                              {"accuracy", s.accuracy},
                              {"llm_calls_mean", s.llm_calls_mean},
                              {"output_tokens_mean", s.output_tokens_mean}});
  }
  return out.dump(2) + "\n";
}

std::vector<MethodSummary> summaries_from_json(std::string_view text) {
  std::vector<MethodSummary> out;
  try {
    const auto in = json::parse(text);
    for (const auto& m : in.at("methods")) {
      MethodSummary s;
      s.method = method_from_string(m.at("method").get<std::string>());
      s.total = m.at("total").get<std::size_t>();
      s.correct = m.at("correct").get<std::size_t>();
      s.abstained = m.at("abstained").get<std::size_t>();
      s.errors = m.at("errors").get<std::size_t>();
      s.accuracy = m.at("accuracy").get<double>();
      s.llm_calls_mean = m.at("llm_calls_mean").get<double>();
      s.output_tokens_mean = m.at("output_tokens_mean").get<double>();
      out.push_back(s);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed summary: ") + e.what());
  }
  return out;
}

// ---- ratings / mock script -----------------------------------------------------

Ratings load_ratings(const fs::path& path) {
  Ratings ratings;
  for_each_line(path, [&](std::size_t line, const std::string& text) {
    if (text.front() == '#') return;
    const auto tab = text.find('\t');
    if (tab == std::string::npos || tab == 0) throw Error(Errc::MalformedLine, line, "expected item_id<TAB>tier");
    const auto id = text.substr(0, tab);
    auto tier = text.substr(tab + 1);
    while (!tier.empty() && (tier.back() == ' ' || tier.back() == '\t')) tier.pop_back();
    if (tier == "exclude") {
      ratings.exclusions.insert(id);
      return;
    }
    try {
      ratings.tiers[id] = tier_from_string(tier);
    } catch (const Error& e) {
      throw Error(Errc::MalformedLine, line, e.detail());
    }
  });
  return ratings;
}

std::map<std::string, ScriptEntry> load_mock_script(const fs::path& path,
                                                    std::span<const QAItem> dataset) {
  std::unordered_map<std::string_view, const QAItem*> by_id;
  for (const auto& item : dataset) by_id.emplace(item.id, &item);

  std::map<std::string, ScriptEntry> script;
  for_each_line(path, [&](std::size_t line, const std::string& text) {
    const auto object = parse_object_line(line, text);
    const auto& id = string_field(object, "id", line);
    const auto item = by_id.find(id);
    if (item == by_id.end()) throw Error(Errc::UnknownItemId, line, "script id '" + id + "' is not in the dataset");
    ScriptEntry entry;
    entry.h_plus = string_field(object, "h_plus", line);
    entry.h_minus = string_field(object, "h_minus", line);
    if (const auto passages = object.find("passages"); passages != object.end() && passages->is_array()) {
      for (const auto& p : *passages) entry.passages.push_back(p.get<std::string>());
    }
    entry.pseudo_doc = object.value("pseudo_doc", "");
    script.emplace(item->second->stem, std::move(entry));
  });
  return script;
}

// ---- run configuration -----------------------------------------------------------

void validate(const RunConfig& config) {
  if (config.method != "all") method_from_string(config.method);
  if (!(config.lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be >= 0");
  for (const double lambda : config.lambdas) {
    if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "sweep lambdas must be >= 0");
  }
  if (config.k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (config.hyde_n == 0) throw Error(Errc::InvalidArgument, "hyde_n must be >= 1");
  if (config.max_retries < 0) throw Error(Errc::InvalidArgument, "max_retries must be >= 0");
  if (config.jobs == 0 || config.scan_workers == 0) throw Error(Errc::InvalidArgument, "jobs must be >= 1");
  if (config.mock_dimension == 0) throw Error(Errc::InvalidArgument, "mock_dimension must be >= 1");
}

void apply_config_file(RunConfig& config, const fs::path& path) {
  const auto in = json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
  if (!in.is_object()) throw Error(Errc::InvalidArgument, "config '" + path.string() + "' is not a JSON object");

  const auto endpoint = [](const json& value, EndpointConfig& target) {
    if (value.contains("url")) target.url = value["url"].get<std::string>();
    if (value.contains("model")) target.model = value["model"].get<std::string>();
    if (value.contains("api_key_env")) target.api_key_env = value["api_key_env"].get<std::string>();
  };

  try {
    for (const auto& [key, value] : in.items()) {
      if (key == "method") config.method = value.get<std::string>();
      else if (key == "lambda") config.lambda = value.get<double>();
      else if (key == "lambdas") config.lambdas = value.get<std::vector<double>>();
      else if (key == "k") config.k = value.get<std::size_t>();
      else if (key == "hyde_n") config.hyde_n = value.get<std::size_t>();
      else if (key == "max_retries") config.max_retries = value.get<int>();
      else if (key == "temperature") config.temperature = value.get<double>();
      else if (key == "hyde_temperature") config.hyde_temperature = value.get<double>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "jobs") config.jobs = value.get<std::size_t>();
      else if (key == "scan_workers") config.scan_workers = value.get<std::size_t>();
      else if (key == "mock") config.mock = value.get<bool>();
      else if (key == "mock_dimension") config.mock_dimension = value.get<std::size_t>();
      else if (key == "generator") endpoint(value, config.generator);
      else if (key == "answerer") endpoint(value, config.answerer);
      else if (key == "embedder") endpoint(value, config.embedder);
      else if (key == "embedding_dimension") config.embedding_dimension = value.get<std::size_t>();
      else if (key == "transport_retries") config.transport_retries = value.get<int>();
      else if (key == "timeout_ms") config.timeout_ms = value.get<std::int64_t>();
      else if (key == "corpus") config.corpus_path = value.get<std::string>();
      else if (key == "dataset") config.dataset_path = value.get<std::string>();
      else if (key == "cache") config.cache_path = value.get<std::string>();
      else if (key == "ratings") config.ratings_path = value.get<std::string>();
      else if (key == "mock_script") config.mock_script_path = value.get<std::string>();
      else if (key == "out") config.output_path = value.get<std::string>();
      else throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, "config '" + path.string() + "': " + e.what());
  }
}

BenchmarkConfig to_benchmark_config(const RunConfig& config, Method method) {
  BenchmarkConfig out;
  out.method = method;
  out.lambda = config.lambda;
  out.k = config.k;
  out.hyde_n = config.hyde_n;
  out.max_retries = config.max_retries;
  out.temperature = config.temperature;
  out.hyde_temperature = config.hyde_temperature;
  out.seed = config.seed;
  out.jobs = config.jobs;
  out.scan.workers = config.scan_workers;
  if (config.mock) out.clock = [] { return std::int64_t{0}; };
  return out;
}

}  // namespace chr
