#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chr/analysis.hpp"
#include "chr/backend.hpp"
#include "chr/hypothesis.hpp"
#include "chr/mock_backends.hpp"
#include "chr/pipeline.hpp"
#include "chr/retrieval.hpp"

namespace chr {

namespace fs = std::filesystem;

// ---- embedding cache ("CHRE" binary format) --------------------------------
//
// Little-endian throughout:
//   magic "CHRE" | version u32 | dimension u32 | count u64
//   then count x (id length u32 | id bytes | dimension x f32)

inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr double kCacheNormTolerance = 1e-5;

struct CacheEntry {
  std::string id;
  Embedding embedding;
};

// Entries are normalized before being narrowed to float32.
void write_cache(const fs::path& path, std::span<const CacheEntry> entries);
// Throws BadMagic, VersionMismatch, TruncatedFile, NormDrift.
std::vector<CacheEntry> load_cache(const fs::path& path);

// ---- corpus and dataset JSONL ------------------------------------------------

// {"id", "text", "embedding"?} per line. Lines without an embedding are looked
// up in `cache_path` when it exists, otherwise embedded with `embedder`; any
// newly embedded vectors are merged into the cache file. Throws
// MalformedLine, DuplicateId, DimensionMismatch (all with line numbers) and
// MissingEmbedding when a line needs an embedder that was not supplied.
Corpus load_corpus(const fs::path& path, EmbedderBackend* embedder = nullptr,
                   const std::optional<fs::path>& cache_path = std::nullopt);

// {"id", "question", "options": {"A": ...}, "answer"?, "dataset"?} per line.
// Throws MalformedLine, InvalidAnswerKey, DuplicateId.
std::vector<QAItem> load_dataset(const fs::path& path);
void save_dataset(const fs::path& path, std::span<const QAItem> items);

// ---- records -------------------------------------------------------------------

std::string record_to_json_line(const EvalRecord& record);
EvalRecord record_from_json_line(std::string_view line);

void write_records(const fs::path& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> load_records(const fs::path& path);

// summary.json: {"methods": [{method, total, correct, ...}, ...]}.
std::string summaries_to_json(std::span<const MethodSummary> summaries);
std::vector<MethodSummary> summaries_from_json(std::string_view text);

// ---- ratings and mock scripts ----------------------------------------------------

// "item_id<TAB>tier" lines, tier one of Excellent/Good/Poor or "exclude".
// Blank lines and lines starting with '#' are skipped.
Ratings load_ratings(const fs::path& path);

// {"id", "h_plus", "h_minus", "passages"?, "pseudo_doc"?} per line, keyed by
// the matching dataset item's stem. Throws UnknownItemId.
std::map<std::string, ScriptEntry> load_mock_script(const fs::path& path,
                                                    std::span<const QAItem> dataset);

// ---- run configuration -------------------------------------------------------------

struct EndpointConfig {
  std::string url;
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the token
};

struct RunConfig {
  std::string method = "all";
  double lambda = kDefaultLambda;
  std::vector<double> lambdas = kDefaultLambdaGrid;  // sweep grid
  std::size_t k = kDefaultTopK;
  std::size_t hyde_n = 8;
  int max_retries = 2;
  double temperature = 0.0;
  double hyde_temperature = 0.7;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::size_t scan_workers = 1;

  bool mock = false;
  std::size_t mock_dimension = 256;

  EndpointConfig generator{"", "", "CHR_GENERATOR_API_KEY"};
  EndpointConfig answerer{"", "", "CHR_ANSWERER_API_KEY"};
  EndpointConfig embedder{"", "", "CHR_EMBEDDER_API_KEY"};
  std::size_t embedding_dimension = 0;  // 0: accept whatever the endpoint returns
  int transport_retries = 2;
  std::int64_t timeout_ms = 60000;

  std::string corpus_path;
  std::string dataset_path;
  std::string cache_path;
  std::string ratings_path;
  std::string mock_script_path;
  std::string output_path = "chr_out";
};

// Throws InvalidArgument.
void validate(const RunConfig& config);

// Overlays the keys present in a JSON config file; unknown keys are rejected.
void apply_config_file(RunConfig& config, const fs::path& path);

BenchmarkConfig to_benchmark_config(const RunConfig& config, Method method);

// ---- files ---------------------------------------------------------------------------

// Writes to "<path>.partial" and renames into place on success, so a failed
// write leaves only the .partial file behind.
void write_file_atomic(const fs::path& path, std::string_view content);

std::string read_file(const fs::path& path);

}  // namespace chr
