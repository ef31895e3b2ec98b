#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chr/pipeline.hpp"
#include "chr/retrieval.hpp"

namespace chr {

// ---- retrieval shift -------------------------------------------------------

// |a ∩ b| / k. Throws InvalidArgument when k == 0 or either set exceeds k.
double overlap_ratio(const std::set<std::string>& a, const std::set<std::string>& b,
                     std::size_t k);

std::set<std::string> hit_ids(const RankedResult& ranked);

struct OverlapCase {
  std::string item_id;
  std::string dataset;
  double overlap = 0.0;

  friend bool operator==(const OverlapCase&, const OverlapCase&) = default;
};

struct OverlapReport {
  std::string label;  // dataset name, or "Combined"
  std::size_t n = 0;
  double zero_overlap_pct = 0.0;
  double mean_overlap = 0.0;
  std::vector<OverlapCase> per_case;

  friend bool operator==(const OverlapReport&, const OverlapReport&) = default;
};

// Cases where `a` is correct and `b` is not, joined on item_id. Throws
// NoQualifyingCases when none qualify.
OverlapReport retrieval_shift(std::span<const EvalRecord> a, std::span<const EvalRecord> b,
                              std::size_t k);

// One row per dataset label (sorted) plus a pooled "Combined" row.
struct OverlapTable {
  std::string method_a;
  std::string method_b;
  std::size_t k = kDefaultTopK;
  std::vector<OverlapReport> rows;
  OverlapReport combined;

  friend bool operator==(const OverlapTable&, const OverlapTable&) = default;
};

OverlapTable retrieval_shift_table(std::span<const EvalRecord> a, std::span<const EvalRecord> b,
                                   std::size_t k);

std::string render_text(const OverlapTable& table);
std::string to_json(const OverlapTable& table);
OverlapTable overlap_table_from_json(std::string_view text);

// ---- lambda sweep ----------------------------------------------------------

inline const std::vector<double> kDefaultLambdaGrid = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4};

struct SweepPoint {
  double lambda = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct SweepReport {
  std::vector<SweepPoint> points;             // strictly increasing lambda
  std::map<std::string, double> baselines;    // method name -> accuracy

  friend bool operator==(const SweepReport&, const SweepReport&) = default;
};

struct LambdaSweep {
  SweepReport report;
  std::vector<BenchmarkRun> runs;  // one per point, same order
};

// Hypothesis pairs are generated and embedded once; only scoring changes per
// lambda. `baselines` are run once each with their own expansions.
LambdaSweep lambda_sweep(std::span<const QAItem> dataset, std::vector<double> lambdas,
                         const Corpus& corpus, const BenchmarkConfig& config, Backends backends,
                         std::span<const Method> baselines = {});

// Same, scoring CHR expansions that were already generated and embedded.
LambdaSweep lambda_sweep(std::span<const QAItem> dataset, std::span<const Expansion> expansions,
                         std::vector<double> lambdas, const Corpus& corpus,
                         const BenchmarkConfig& config, Backends backends);

std::string render_text(const SweepReport& report);
std::string render_svg(const SweepReport& report);
std::string to_json(const SweepReport& report);
SweepReport sweep_report_from_json(std::string_view text);

// ---- cost ------------------------------------------------------------------

struct MethodCost {
  double llm_calls_mean = 0.0;
  double output_tokens_mean = 0.0;
  // reference mean / this mean; absent when this method generated no tokens.
  std::optional<double> token_reduction;

  friend bool operator==(const MethodCost&, const MethodCost&) = default;
};

struct CostReport {
  std::map<Method, MethodCost> per_method;
  Method reference = Method::Hyde;  // most expensive method present

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

// Groups records by method. Throws EmptyInput.
CostReport cost_report(std::span<const EvalRecord> records);

std::string render_text(const CostReport& report);
std::string to_json(const CostReport& report);
CostReport cost_report_from_json(std::string_view text);

// ---- stratified accuracy ---------------------------------------------------

enum class Tier { Excellent, Good, Poor };

std::string_view to_string(Tier tier) noexcept;
Tier tier_from_string(std::string_view name);

struct Ratings {
  std::map<std::string, Tier> tiers;
  std::set<std::string> exclusions;
};

struct TierStats {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;

  friend bool operator==(const TierStats&, const TierStats&) = default;
};

using StratifiedReport = std::map<Tier, TierStats>;

// Excluded ids are dropped; empty tiers are absent. Throws UnknownItemId when
// a rated or excluded id has no record.
StratifiedReport stratified_accuracy(std::span<const EvalRecord> records, const Ratings& ratings);

std::string render_text(const StratifiedReport& report);
std::string to_json(const StratifiedReport& report);
StratifiedReport stratified_report_from_json(std::string_view text);

// ---- formatting helpers ----------------------------------------------------

std::string format_fixed(double value, int decimals);
// `digits` significant figures, e.g. format_significant(9.6999, 3) == "9.70".
std::string format_significant(double value, int digits);

}  // namespace chr
