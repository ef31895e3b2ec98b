#include "chr/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "chr/analysis.hpp"
#include "chr/error.hpp"
#include "chr/http_backends.hpp"
#include "chr/io.hpp"
#include "chr/mock_backends.hpp"
#include "chr/pipeline.hpp"
#include "chr/retrieval.hpp"
#include "json.hpp"

namespace chr {
namespace {

// ---- configuration flags ---------------------------------------------------------

// Flags shared by every subcommand that drives the pipeline. Precedence is
// built-in defaults, then --config, then explicit flags.
class PipelineFlags {
 public:
  void attach(CLI::App& app, bool with_method) {
    app.add_option("--config", config_path_, "JSON config file")->check(CLI::ExistingFile);
    if (with_method) {
      bind(app, "--method", method_, "standard|hyde|query2doc|chr|h-plus-only|all",
           [](RunConfig& c, const std::string& v) { c.method = v; });
      bind(app, "--lambda", lambda_, "contrastive weight",
           [](RunConfig& c, double v) { c.lambda = v; });
    }
    bind(app, "--k", k_, "documents retrieved per question",
         [](RunConfig& c, std::size_t v) { c.k = v; });
    bind(app, "--hyde-n", hyde_n_, "HyDE passages per question",
         [](RunConfig& c, std::size_t v) { c.hyde_n = v; });
    bind(app, "--max-retries", max_retries_, "re-prompts after an unparseable hypothesis reply",
         [](RunConfig& c, int v) { c.max_retries = v; });
    bind(app, "--seed", seed_, "generation seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
    bind(app, "--jobs", jobs_, "questions processed concurrently",
         [](RunConfig& c, std::size_t v) { c.jobs = v; });
    bind(app, "--scan-workers", scan_workers_, "threads per corpus scan",
         [](RunConfig& c, std::size_t v) { c.scan_workers = v; });
    bind(app, "--out", out_, "output directory", [](RunConfig& c, const std::string& v) { c.output_path = v; });
    bind(app, "--dataset", dataset_, "questions JSONL",
         [](RunConfig& c, const std::string& v) { c.dataset_path = v; });
    bind(app, "--corpus", corpus_, "documents JSONL",
         [](RunConfig& c, const std::string& v) { c.corpus_path = v; });
    bind(app, "--cache", cache_, "embedding cache file",
         [](RunConfig& c, const std::string& v) { c.cache_path = v; });
    bind(app, "--ratings", ratings_, "hypothesis quality ratings TSV",
         [](RunConfig& c, const std::string& v) { c.ratings_path = v; });
    bind(app, "--mock-script", mock_script_, "scripted generator replies JSONL",
         [](RunConfig& c, const std::string& v) { c.mock_script_path = v; });
    mock_flag_ = app.add_flag("--mock", "use the deterministic offline backends");
  }

  [[nodiscard]] RunConfig resolve() const {
    RunConfig config;
    if (!config_path_.empty()) apply_config_file(config, config_path_);
    for (const auto& [option, apply] : setters_) {
      if (option->count() > 0) apply(config);
    }
    if (mock_flag_ != nullptr && mock_flag_->count() > 0) config.mock = true;
    fill_default_paths(config);
    validate(config);
    return config;
  }

 private:
  template <typename T, typename Apply>
  void bind(CLI::App& app, const std::string& name, T& storage, const std::string& description, Apply apply) {
    auto* option = app.add_option(name, storage, description);
    setters_.emplace_back(option, [&storage, apply](RunConfig& c) { apply(c, storage); });
  }

  static void fill_default_paths(RunConfig& config) {
#ifdef CHR_FIXTURE_DIR
    if (config.mock) {
      const fs::path fixture = CHR_FIXTURE_DIR;
      if (config.dataset_path.empty()) config.dataset_path = (fixture / "dataset.jsonl").string();
      if (config.corpus_path.empty()) config.corpus_path = (fixture / "corpus.jsonl").string();
    }
#endif
    if (config.dataset_path.empty()) return;
    const auto dir = fs::path(config.dataset_path).parent_path();
    if (config.mock && config.mock_script_path.empty() && fs::exists(dir / "mock_script.jsonl")) {
      config.mock_script_path = (dir / "mock_script.jsonl").string();
    }
    if (config.ratings_path.empty() && fs::exists(dir / "ratings.tsv")) {
      config.ratings_path = (dir / "ratings.tsv").string();
    }
  }

  std::string config_path_, method_, out_, dataset_, corpus_, cache_, ratings_, mock_script_;
  double lambda_ = 0.0;
  std::size_t k_ = 0, hyde_n_ = 0, jobs_ = 0, scan_workers_ = 0;
  int max_retries_ = 0;
  std::uint64_t seed_ = 0;
  CLI::Option* mock_flag_ = nullptr;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters_;
};

// ---- backends --------------------------------------------------------------------

HttpEndpoint endpoint_from(const EndpointConfig& config, const RunConfig& run, const char* role) {
  if (config.url.empty() || config.model.empty()) {
    throw Error(Errc::InvalidArgument, std::string(role) + " url and model must be configured (or pass --mock)");
  }
  HttpEndpoint endpoint;
  endpoint.url = config.url;
  endpoint.model = config.model;
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) endpoint.api_key = key;
  }
  endpoint.timeout = std::chrono::milliseconds(run.timeout_ms);
  endpoint.transport_retries = run.transport_retries;
  return endpoint;
}

std::unique_ptr<EmbedderBackend> make_embedder(const RunConfig& config) {
  // The mock embedder stands in for a fixed model, so it ignores --seed.
  if (config.mock) return std::make_unique<HashEmbedder>(config.mock_dimension, 0);
  return std::make_unique<HttpEmbedder>(endpoint_from(config.embedder, config, "embedder"),
                                        config.embedding_dimension);
}

struct BackendSet {
  std::unique_ptr<GeneratorBackend> expander;
  std::unique_ptr<GeneratorBackend> answerer;
  std::unique_ptr<EmbedderBackend> embedder;

  Backends view() { return {*expander, *answerer, *embedder}; }
};

BackendSet make_backends(const RunConfig& config, std::span<const QAItem> dataset) {
  BackendSet set;
  set.embedder = make_embedder(config);
  if (config.mock) {
    std::map<std::string, ScriptEntry> script;
    if (!config.mock_script_path.empty()) script = load_mock_script(config.mock_script_path, dataset);
    set.expander = std::make_unique<ScriptedGenerator>(std::move(script));
    set.answerer = std::make_unique<ScriptedGenerator>();
    return set;
  }
  const auto generator = endpoint_from(config.generator, config, "generator");
  set.expander = std::make_unique<HttpGenerator>(generator);
  set.answerer = config.answerer.url.empty()
                     ? std::make_unique<HttpGenerator>(generator)
                     : std::make_unique<HttpGenerator>(endpoint_from(config.answerer, config, "answerer"));
  return set;
}

std::optional<fs::path> cache_of(const RunConfig& config) {
  if (config.cache_path.empty()) return std::nullopt;
  return fs::path(config.cache_path);
}

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw Error(Errc::InvalidArgument, std::string("no ") + what + " given");
}

// ---- output helpers ----------------------------------------------------------------

std::string records_file(Method method) { return "records." + std::string(to_string(method)) + ".jsonl"; }

std::string render_summaries(std::span<const MethodSummary> summaries) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %6s %8s %9s %7s %10s %12s\n", "method", "n", "correct", "abstained",
                "errors", "accuracy", "calls/tokens");
  out << line;
  for (const auto& s : summaries) {
    std::snprintf(line, sizeof line, "%-12s %6zu %8zu %9zu %7zu %9.1f%% %5.2f/%-6.1f\n",
                  std::string(to_string(s.method)).c_str(), s.total, s.correct, s.abstained, s.errors,
                  100.0 * s.accuracy, s.llm_calls_mean, s.output_tokens_mean);
    out << line;
  }
  return out.str();
}

class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& name, std::string_view content) {
    write_file_atomic(root_ / name, content);
    written_.push_back(name);
  }

  void list(std::ostream& out) const {
    for (const auto& name : written_) out << "wrote " << (root_ / name).string() << "\n";
  }

 private:
  fs::path root_;
  std::vector<std::string> written_;
};

std::vector<EvalRecord> load_all_records(const std::vector<std::string>& paths) {
  std::vector<EvalRecord> records;
  for (const auto& path : paths) {
    auto more = load_records(path);
    records.insert(records.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return records;
}

// ---- subcommands -------------------------------------------------------------------

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  require_path(config.dataset_path, "--dataset");
  require_path(config.corpus_path, "--corpus");
  const auto dataset = load_dataset(config.dataset_path);
  auto backends = make_backends(config, dataset);
  const auto corpus = load_corpus(config.corpus_path, backends.embedder.get(), cache_of(config));

  std::vector<Method> methods;
  if (config.method == "all") {
    methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  } else {
    methods.push_back(method_from_string(config.method));
  }

  OutputDir dir(config.output_path);
  std::map<Method, std::vector<Expansion>> expansions;
  std::map<Method, BenchmarkRun> runs;
  std::vector<MethodSummary> summaries;
  for (const auto method : methods) {
    const auto bench = to_benchmark_config(config, method);
    // H+-only scores the same hypothesis pairs as CHR, so they are generated once.
    const auto source = method == Method::HPlusOnly ? Method::Chr : method;
    auto cached = expansions.find(source);
    if (cached == expansions.end()) {
      auto source_config = bench;
      source_config.method = source;
      cached = expansions.emplace(source, expand_all(dataset, source_config, backends.view())).first;
    }
    auto run = run_with_expansions(dataset, cached->second, corpus, bench, backends.view());
    std::string lines;
    for (const auto& record : run.records) lines += record_to_json_line(record) + "\n";
    dir.write(records_file(method), lines);
    summaries.push_back(run.summary);
    runs.emplace(method, std::move(run));
  }
  dir.write("summary.json", summaries_to_json(summaries));
  out << render_summaries(summaries);

  if (config.method == "all") {
    const auto& chr_run = runs.at(Method::Chr);
    try {
      const auto table = retrieval_shift_table(chr_run.records, runs.at(Method::Hyde).records, config.k);
      dir.write("overlap.json", to_json(table));
      dir.write("overlap.txt", render_text(table));
    } catch (const Error& e) {
      if (e.code() != Errc::NoQualifyingCases) throw;
      err << "chr: overlap report skipped: " << e.what() << "\n";
    }

    std::vector<EvalRecord> all_records;
    for (const auto& [method, run] : runs) all_records.insert(all_records.end(), run.records.begin(), run.records.end());
    const auto costs = cost_report(all_records);
    dir.write("cost.json", to_json(costs));
    dir.write("cost.txt", render_text(costs));

    auto sweep = lambda_sweep(dataset, expansions.at(Method::Chr), config.lambdas, corpus,
                              to_benchmark_config(config, Method::Chr), backends.view());
    for (const auto method : {Method::Standard, Method::Hyde}) {
      sweep.report.baselines[std::string(to_string(method))] = runs.at(method).summary.accuracy;
    }
    dir.write("sweep.json", to_json(sweep.report));
    dir.write("sweep.txt", render_text(sweep.report));
    dir.write("sweep.svg", render_svg(sweep.report));

    if (!config.ratings_path.empty()) {
      const auto report = stratified_accuracy(chr_run.records, load_ratings(config.ratings_path));
      dir.write("stratify.json", to_json(report));
      dir.write("stratify.txt", render_text(report));
    } else {
      err << "chr: stratified report skipped: no ratings file\n";
    }
  }
  dir.list(out);
  return 0;
}

int cmd_sweep(const RunConfig& config, std::vector<double> lambdas, const std::vector<std::string>& baseline_names,
              std::ostream& out) {
  require_path(config.dataset_path, "--dataset");
  require_path(config.corpus_path, "--corpus");
  const auto dataset = load_dataset(config.dataset_path);
  auto backends = make_backends(config, dataset);
  const auto corpus = load_corpus(config.corpus_path, backends.embedder.get(), cache_of(config));

  std::vector<Method> baselines;
  for (const auto& name : baseline_names) baselines.push_back(method_from_string(name));
  if (lambdas.empty()) lambdas = config.lambdas;

  const auto sweep = lambda_sweep(dataset, std::move(lambdas), corpus, to_benchmark_config(config, Method::Chr),
                                  backends.view(), baselines);
  OutputDir dir(config.output_path);
  dir.write("sweep.json", to_json(sweep.report));
  dir.write("sweep.txt", render_text(sweep.report));
  dir.write("sweep.svg", render_svg(sweep.report));
  out << render_text(sweep.report);
  dir.list(out);
  return 0;
}

int cmd_embed(const RunConfig& config, std::ostream& out) {
  require_path(config.corpus_path, "--corpus");
  require_path(config.cache_path, "--cache");
  auto embedder = make_embedder(config);
  const auto corpus = load_corpus(config.corpus_path, embedder.get(), cache_of(config));
  out << "cached " << corpus.size() << " documents of dimension " << corpus.dimension() << " in "
      << config.cache_path << "\n";
  return 0;
}

template <typename Report>
int emit_report(const Report& report, const std::string& name, const std::string& out_dir, bool as_json,
                std::ostream& out) {
  if (!out_dir.empty()) {
    OutputDir dir(out_dir);
    dir.write(name + ".json", to_json(report));
    dir.write(name + ".txt", render_text(report));
  }
  out << (as_json ? to_json(report) : render_text(report));
  return 0;
}

// Reloads any file the CLI writes and renders it as text.
int cmd_show(const std::string& path, std::ostream& out) {
  if (fs::path(path).extension() == ".jsonl") {
    const auto records = load_records(path);
    out << render_summaries(std::vector{summarize(records)});
    return 0;
  }
  const auto text = read_file(path);
  const auto parsed = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_object()) throw Error(Errc::InvalidArgument, "'" + path + "' is not a JSON report");
  if (parsed.contains("methods")) {
    out << render_summaries(summaries_from_json(text));
  } else if (parsed.contains("method_a")) {
    out << render_text(overlap_table_from_json(text));
  } else if (parsed.contains("points")) {
    out << render_text(sweep_report_from_json(text));
  } else if (parsed.contains("reference")) {
    out << render_text(cost_report_from_json(text));
  } else {
    out << render_text(stratified_report_from_json(text));
  }
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive hypothesis retrieval: benchmark runner and analyses", "chr"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one method (or all) over a dataset");
  PipelineFlags run_flags;
  run_flags.attach(*run, /*with_method=*/true);

  auto* sweep = app.add_subcommand("sweep", "accuracy over a grid of lambda values");
  PipelineFlags sweep_flags;
  sweep_flags.attach(*sweep, /*with_method=*/false);
  std::vector<double> sweep_lambdas;
  sweep->add_option("--lambda", sweep_lambdas, "comma-separated lambda grid")->delimiter(',');
  std::vector<std::string> sweep_baselines{"standard", "hyde"};
  sweep->add_option("--baseline", sweep_baselines, "baseline methods drawn as reference lines")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_flag_callback("--no-baselines", [&] { sweep_baselines.clear(); }, "skip the baseline runs");

  auto* embed = app.add_subcommand("embed", "embed a corpus into the binary cache");
  PipelineFlags embed_flags;
  embed_flags.attach(*embed, /*with_method=*/false);

  std::string out_dir;
  bool as_json = false;
  std::size_t k = kDefaultTopK;

  auto* compare = app.add_subcommand("compare", "retrieval shift between two record files");
  std::string records_a, records_b;
  compare->add_option("records_a", records_a, "records of the method that should win")->required();
  compare->add_option("records_b", records_b, "records of the method it is compared against")->required();
  compare->add_option("--k", k, "top-K depth the records were retrieved at")->capture_default_str();

  auto* cost = app.add_subcommand("cost", "cost profile of one or more record files");
  std::vector<std::string> cost_inputs;
  cost->add_option("records", cost_inputs, "record files")->required();

  auto* stratify = app.add_subcommand("stratify", "accuracy by hypothesis quality tier");
  std::string stratify_input, ratings_path;
  stratify->add_option("records", stratify_input, "record file")->required();
  stratify->add_option("--ratings", ratings_path, "item_id<TAB>tier file")->required();

  for (auto* sub : {compare, cost, stratify}) {
    sub->add_option("--out", out_dir, "also write <report>.json and <report>.txt here");
    sub->add_flag("--json", as_json, "print JSON instead of text");
  }

  auto* show = app.add_subcommand("show", "reload an emitted record or report file and print it");
  std::string show_path;
  show->add_option("file", show_path, "file written by this tool")->required()->check(CLI::ExistingFile);

  std::ranges::reverse(args);
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (run->parsed()) return cmd_run(run_flags.resolve(), out, err);
    if (sweep->parsed()) return cmd_sweep(sweep_flags.resolve(), sweep_lambdas, sweep_baselines, out);
    if (embed->parsed()) return cmd_embed(embed_flags.resolve(), out);
    if (compare->parsed()) {
      const auto a = load_records(records_a);
      const auto b = load_records(records_b);
      return emit_report(retrieval_shift_table(a, b, k), "overlap", out_dir, as_json, out);
    }
    if (cost->parsed()) return emit_report(cost_report(load_all_records(cost_inputs)), "cost", out_dir, as_json, out);
    if (stratify->parsed()) {
      const auto report = stratified_accuracy(load_records(stratify_input), load_ratings(ratings_path));
      return emit_report(report, "stratify", out_dir, as_json, out);
    }
    if (show->parsed()) return cmd_show(show_path, out);
  } catch (const std::exception& e) {
    err << "chr: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace chr
