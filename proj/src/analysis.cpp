#include "chr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace chr {

using ojson = nlohmann::ordered_json;

namespace {

// Left-aligned first column, the rest padded to the widest cell.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void add_rule() { rules_.push_back(rows_.size()); }

  [[nodiscard]] std::string str() const {
    std::vector<std::size_t> widths;
    for (const auto& row : rows_) {
      widths.resize(std::max(widths.size(), row.size()));
      for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
    }
    std::size_t total = 0;
    for (const auto w : widths) total += w + 2;

    std::string out;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (r == 1 || std::ranges::find(rules_, r) != rules_.end()) out += std::string(total - 2, '-') + "\n";
      std::string line;
      for (std::size_t c = 0; c < rows_[r].size(); ++c) {
        line += rows_[r][c];
        if (c + 1 < rows_[r].size()) line += std::string(widths[c] - display_width(rows_[r][c]) + 2, ' ');
      }
      out += line + "\n";
    }
    return out;
  }

 private:
  static std::size_t display_width(const std::string& s) {
    return static_cast<std::size_t>(
        std::ranges::count_if(s, [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
  }

  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> rules_;
};

std::string trim_zeros(std::string s) {
  if (s.find('.') == std::string::npos) return s;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

ojson cases_to_json(const std::vector<OverlapCase>& cases) {
  ojson out = ojson::array();
  for (const auto& c : cases) {
    out.push_back({{"item_id", c.item_id}, {"dataset", c.dataset}, {"overlap", c.overlap}});
  }
  return out;
}

ojson report_to_json(const OverlapReport& report) {
  ojson out;
  out["label"] = report.label;
  out["n"] = report.n;
  out["zero_overlap_pct"] = report.zero_overlap_pct;
  out["mean_overlap"] = report.mean_overlap;
  out["per_case"] = cases_to_json(report.per_case);
  return out;
}

OverlapReport report_from_json(const ojson& in) {
  OverlapReport report;
  report.label = in.at("label").get<std::string>();
  report.n = in.at("n").get<std::size_t>();
  report.zero_overlap_pct = in.at("zero_overlap_pct").get<double>();
  report.mean_overlap = in.at("mean_overlap").get<double>();
  for (const auto& c : in.at("per_case")) {
    report.per_case.push_back({c.at("item_id").get<std::string>(), c.at("dataset").get<std::string>(),
                               c.at("overlap").get<double>()});
  }
  return report;
}

OverlapReport aggregate(std::string label, std::vector<OverlapCase> cases) {
  OverlapReport report;
  report.label = std::move(label);
  report.n = cases.size();
  std::size_t zero = 0;
  double sum = 0.0;
  for (const auto& c : cases) {
    zero += c.overlap == 0.0 ? 1 : 0;
    sum += c.overlap;
  }
  const auto n = static_cast<double>(report.n);
  report.zero_overlap_pct = 100.0 * static_cast<double>(zero) / n;
  report.mean_overlap = sum / n;
  report.per_case = std::move(cases);
  return report;
}

std::vector<OverlapCase> qualifying_cases(std::span<const EvalRecord> a,
                                          std::span<const EvalRecord> b, std::size_t k) {
  std::unordered_map<std::string_view, const EvalRecord*> by_id;
  for (const auto& record : b) by_id.emplace(record.item_id, &record);

  std::vector<OverlapCase> cases;
  for (const auto& record : a) {
    const auto other = by_id.find(record.item_id);
    if (other == by_id.end()) {
      throw Error(Errc::UnknownItemId, "'" + record.item_id + "' missing from the second record set");
    }
    if (!record.correct || other->second->correct) continue;
    cases.push_back({record.item_id, record.dataset,
                     overlap_ratio(hit_ids(record.ranked), hit_ids(other->second->ranked), k)});
  }
  std::ranges::sort(cases, {}, &OverlapCase::item_id);
  return cases;
}

std::string method_label(std::span<const EvalRecord> records) {
  return records.empty() ? std::string() : std::string(to_string(records.front().method));
}

}  // namespace

// ---- formatting -------------------------------------------------------------

std::string format_fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
  return buffer;
}

std::string format_significant(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return format_fixed(value, std::max(digits - 1, 0));
  // Round in scientific notation first so carries (9.996 -> 10.0) move the exponent.
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*e", digits - 1, value);
  const int exponent = std::atoi(std::strchr(buffer, 'e') + 1);
  return format_fixed(std::strtod(buffer, nullptr), std::max(digits - 1 - exponent, 0));
}

// ---- retrieval shift ----------------------------------------------------------

double overlap_ratio(const std::set<std::string>& a, const std::set<std::string>& b,
                     std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (a.size() > k || b.size() > k) {
    throw Error(Errc::InvalidArgument, "overlap sets must hold at most k ids");
  }
  std::size_t shared = 0;
  for (const auto& id : a) shared += b.contains(id) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(k);
}

std::set<std::string> hit_ids(const RankedResult& ranked) {
  std::set<std::string> ids;
  for (const auto& hit : ranked.hits) ids.insert(hit.doc_id);
  return ids;
}

OverlapReport retrieval_shift(std::span<const EvalRecord> a, std::span<const EvalRecord> b,
                              std::size_t k) {
  auto cases = qualifying_cases(a, b, k);
  if (cases.empty()) throw Error(Errc::NoQualifyingCases, "no case where A is correct and B is not");
  return aggregate("Combined", std::move(cases));
}

OverlapTable retrieval_shift_table(std::span<const EvalRecord> a, std::span<const EvalRecord> b,
                                   std::size_t k) {
  OverlapTable table;
  table.method_a = method_label(a);
  table.method_b = method_label(b);
  table.k = k;
  table.combined = retrieval_shift(a, b, k);

  std::map<std::string, std::vector<OverlapCase>> by_dataset;
  for (const auto& c : table.combined.per_case) by_dataset[c.dataset].push_back(c);
  for (auto& [dataset, cases] : by_dataset) {
    table.rows.push_back(aggregate(dataset.empty() ? "(unlabeled)" : dataset, std::move(cases)));
  }
  return table;
}

std::string render_text(const OverlapTable& table) {
  TextTable text({"Dataset", "n", "Zero Overlap", "Mean Overlap"});
  const auto row = [](const OverlapReport& r) {
    return std::vector<std::string>{r.label, std::to_string(r.n), format_fixed(r.zero_overlap_pct, 1) + "%",
                                    format_fixed(r.mean_overlap, 2)};
  };
  for (const auto& r : table.rows) text.add(row(r));
  text.add_rule();
  text.add(row(table.combined));
  return "Top-" + std::to_string(table.k) + " overlap, cases where " + table.method_a +
         " is correct and " + table.method_b + " is not\n\n" + text.str();
}

std::string to_json(const OverlapTable& table) {
  ojson out;
  out["method_a"] = table.method_a;
  out["method_b"] = table.method_b;
  out["k"] = table.k;
  out["rows"] = ojson::array();
  for (const auto& r : table.rows) out["rows"].push_back(report_to_json(r));
  out["combined"] = report_to_json(table.combined);
  return out.dump(2) + "\n";
}

OverlapTable overlap_table_from_json(std::string_view text) {
  const auto in = ojson::parse(text);
  OverlapTable table;
  table.method_a = in.at("method_a").get<std::string>();
  table.method_b = in.at("method_b").get<std::string>();
  table.k = in.at("k").get<std::size_t>();
  for (const auto& r : in.at("rows")) table.rows.push_back(report_from_json(r));
  table.combined = report_from_json(in.at("combined"));
  return table;
}

// ---- lambda sweep --------------------------------------------------------------

namespace {

std::vector<double> sorted_grid(std::vector<double> lambdas) {
  if (lambdas.empty()) throw Error(Errc::InvalidArgument, "lambda grid is empty");
  for (const double lambda : lambdas) {
    if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda values must be >= 0");
  }
  std::ranges::sort(lambdas);
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  return lambdas;
}

}  // namespace

LambdaSweep lambda_sweep(std::span<const QAItem> dataset, std::vector<double> lambdas,
                         const Corpus& corpus, const BenchmarkConfig& config, Backends backends,
                         std::span<const Method> baselines) {
  lambdas = sorted_grid(std::move(lambdas));
  if (dataset.empty()) throw Error(Errc::EmptyInput, "dataset is empty");

  auto chr_config = config;
  chr_config.method = Method::Chr;
  const auto expansions = expand_all(dataset, chr_config, backends);
  auto sweep = lambda_sweep(dataset, expansions, std::move(lambdas), corpus, config, backends);

  for (const auto method : baselines) {
    auto baseline_config = config;
    baseline_config.method = method;
    const auto run = run_benchmark(dataset, corpus, baseline_config, backends);
    sweep.report.baselines[std::string(to_string(method))] = run.summary.accuracy;
  }
  return sweep;
}

LambdaSweep lambda_sweep(std::span<const QAItem> dataset, std::span<const Expansion> expansions,
                         std::vector<double> lambdas, const Corpus& corpus,
                         const BenchmarkConfig& config, Backends backends) {
  lambdas = sorted_grid(std::move(lambdas));
  if (dataset.empty()) throw Error(Errc::EmptyInput, "dataset is empty");
  if (expansions.size() != dataset.size()) {
    throw Error(Errc::InvalidArgument, "expected one expansion per dataset item");
  }

  auto chr_config = config;
  chr_config.method = Method::Chr;
  LambdaSweep sweep;
  for (const double lambda : lambdas) {
    chr_config.lambda = lambda;
    auto run = run_with_expansions(dataset, expansions, corpus, chr_config, backends);
    sweep.report.points.push_back({lambda, run.summary.accuracy});
    sweep.runs.push_back(std::move(run));
  }
  return sweep;
}

std::string render_text(const SweepReport& report) {
  TextTable text({"lambda", "Accuracy"});
  for (const auto& p : report.points) text.add({format_fixed(p.lambda, 2), format_fixed(100.0 * p.accuracy, 1) + "%"});
  if (!report.baselines.empty()) {
    text.add_rule();
    for (const auto& [name, acc] : report.baselines) text.add({name, format_fixed(100.0 * acc, 1) + "%"});
  }
  return text.str();
}

std::string render_svg(const SweepReport& report) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 150, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double x_min = 0.0, x_max = 1.0;
  if (!report.points.empty()) {
    x_min = report.points.front().lambda;
    x_max = report.points.back().lambda;
  }
  if (x_max - x_min < 1e-9) {
    x_min -= 0.1;
    x_max += 0.1;
  }
  double y_min = 1.0, y_max = 0.0;
  for (const auto& p : report.points) {
    y_min = std::min(y_min, p.accuracy);
    y_max = std::max(y_max, p.accuracy);
  }
  for (const auto& [name, acc] : report.baselines) {
    y_min = std::min(y_min, acc);
    y_max = std::max(y_max, acc);
  }
  if (y_min > y_max) {
    y_min = 0.0;
    y_max = 1.0;
  }
  const double pad = std::max(0.02, 0.1 * (y_max - y_min));
  y_min = std::max(0.0, y_min - pad);
  y_max = std::min(1.0, y_max + pad);

  const auto px = [&](double lambda) { return kLeft + (lambda - x_min) / (x_max - x_min) * plot_w; };
  const auto py = [&](double acc) { return kTop + (y_max - acc) / (y_max - y_min) * plot_h; };
  const auto num = [](double v) { return format_fixed(v, 2); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
      << kTop + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";

  for (const auto& p : report.points) {
    svg << "<text x=\"" << num(px(p.lambda)) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << format_fixed(p.lambda, 1) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double acc = y_min + (y_max - y_min) * i / 4.0;
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(acc) + 4) << "\" text-anchor=\"end\">"
        << format_fixed(100.0 * acc, 1) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">lambda</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + plot_h / 2 << ")\">Accuracy (%)</text>\n";

  static constexpr const char* kBaselineColors[] = {"#d62728", "#2ca02c", "#9467bd", "#8c564b"};
  std::size_t color = 0;
  for (const auto& [name, acc] : report.baselines) {
    const auto* stroke = kBaselineColors[color++ % std::size(kBaselineColors)];
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(acc)) << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
        << num(py(acc)) << "\" stroke=\"" << stroke << "\" stroke-dasharray=\"6 4\"/>\n";
    svg << "<text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << num(py(acc) + 4) << "\" fill=\"" << stroke
        << "\">" << name << " (" << format_fixed(100.0 * acc, 1) << ")</text>\n";
  }

  if (!report.points.empty()) {
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < report.points.size(); ++i) {
      svg << (i ? " " : "") << num(px(report.points[i].lambda)) << "," << num(py(report.points[i].accuracy));
    }
    svg << "\"/>\n";
    for (const auto& p : report.points) {
      svg << "<circle cx=\"" << num(px(p.lambda)) << "\" cy=\"" << num(py(p.accuracy))
          << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    }
    svg << "<text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << kTop + 4 << "\" fill=\"#1f77b4\">chr</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string to_json(const SweepReport& report) {
  ojson out;
  out["points"] = ojson::array();
  for (const auto& p : report.points) out["points"].push_back({{"lambda", p.lambda}, {"accuracy", p.accuracy}});
  out["baselines"] = ojson::object();
  for (const auto& [name, acc] : report.baselines) out["baselines"][name] = acc;
  return out.dump(2) + "\n";
}

SweepReport sweep_report_from_json(std::string_view text) {
  const auto in = ojson::parse(text);
  SweepReport report;
  for (const auto& p : in.at("points")) {
    report.points.push_back({p.at("lambda").get<double>(), p.at("accuracy").get<double>()});
  }
  for (const auto& [name, acc] : in.at("baselines").items()) report.baselines[name] = acc.get<double>();
  return report;
}

// ---- cost ----------------------------------------------------------------------

CostReport cost_report(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyInput, "no records for the cost report");
  std::map<Method, std::pair<CostEntry, std::size_t>> totals;
  for (const auto& record : records) {
    auto& [sum, count] = totals[record.method];
    sum += record.cost;
    ++count;
  }

  CostReport report;
  for (const auto& [method, total] : totals) {
    const auto n = static_cast<double>(total.second);
    report.per_method[method] = {static_cast<double>(total.first.llm_calls) / n,
                                 static_cast<double>(total.first.output_tokens) / n, std::nullopt};
  }
  report.reference = std::ranges::max_element(report.per_method, [](const auto& a, const auto& b) {
                       return a.second.output_tokens_mean < b.second.output_tokens_mean;
                     })->first;

  const double reference_tokens = report.per_method[report.reference].output_tokens_mean;
  for (auto& [method, cost] : report.per_method) {
    if (method == report.reference) {
      cost.token_reduction = 1.0;
    } else if (cost.output_tokens_mean > 0.0) {
      cost.token_reduction = reference_tokens / cost.output_tokens_mean;
    }
  }
  return report;
}

std::string render_text(const CostReport& report) {
  TextTable text({"Method", "LLM Calls", "Output Tokens", "Token Reduction"});
  for (const auto& [method, cost] : report.per_method) {
    text.add({std::string(to_string(method)), trim_zeros(format_fixed(cost.llm_calls_mean, 2)),
              trim_zeros(format_fixed(cost.output_tokens_mean, 1)),
              cost.token_reduction ? format_significant(*cost.token_reduction, 3) + "x" : "N/A"});
  }
  return "Query-expansion cost per question; token reduction relative to " +
         std::string(to_string(report.reference)) + "\n\n" + text.str();
}

std::string to_json(const CostReport& report) {
  ojson out;
  out["reference"] = to_string(report.reference);
  out["per_method"] = ojson::object();
  for (const auto& [method, cost] : report.per_method) {
    ojson entry;
    entry["llm_calls_mean"] = cost.llm_calls_mean;
    entry["output_tokens_mean"] = cost.output_tokens_mean;
    entry["token_reduction"] = cost.token_reduction ? ojson(*cost.token_reduction) : ojson(nullptr);
    out["per_method"][std::string(to_string(method))] = std::move(entry);
  }
  return out.dump(2) + "\n";
}

CostReport cost_report_from_json(std::string_view text) {
  const auto in = ojson::parse(text);
  CostReport report;
  report.reference = method_from_string(in.at("reference").get<std::string>());
  for (const auto& [name, entry] : in.at("per_method").items()) {
    MethodCost cost;
    cost.llm_calls_mean = entry.at("llm_calls_mean").get<double>();
    cost.output_tokens_mean = entry.at("output_tokens_mean").get<double>();
    if (!entry.at("token_reduction").is_null()) cost.token_reduction = entry["token_reduction"].get<double>();
    report.per_method[method_from_string(name)] = cost;
  }
  return report;
}

// ---- stratified accuracy ---------------------------------------------------------

std::string_view to_string(Tier tier) noexcept {
  switch (tier) {
    case Tier::Excellent: return "Excellent";
    case Tier::Good: return "Good";
    case Tier::Poor: return "Poor";
  }
  return "Poor";
}

Tier tier_from_string(std::string_view name) {
  std::string lowered(name);
  std::ranges::transform(lowered, lowered.begin(),
                         [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered == "excellent") return Tier::Excellent;
  if (lowered == "good") return Tier::Good;
  if (lowered == "poor") return Tier::Poor;
  throw Error(Errc::InvalidArgument, "unknown rating tier '" + std::string(name) + "'");
}

StratifiedReport stratified_accuracy(std::span<const EvalRecord> records, const Ratings& ratings) {
  std::unordered_map<std::string_view, const EvalRecord*> by_id;
  for (const auto& record : records) {
    if (!by_id.emplace(record.item_id, &record).second) {
      throw Error(Errc::InvalidArgument, "duplicate record for item '" + record.item_id + "'");
    }
  }
  for (const auto& id : ratings.exclusions) {
    if (!by_id.contains(id)) throw Error(Errc::UnknownItemId, "excluded id '" + id + "' has no record");
  }

  StratifiedReport report;
  for (const auto& [id, tier] : ratings.tiers) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(Errc::UnknownItemId, "rated id '" + id + "' has no record");
    if (ratings.exclusions.contains(id)) continue;
    auto& stats = report[tier];
    ++stats.n;
    stats.correct += it->second->correct ? 1 : 0;
  }
  for (auto& [tier, stats] : report) {
    stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(stats.n);
  }
  return report;
}

std::string render_text(const StratifiedReport& report) {
  TextTable text({"H- Quality", "n", "Correct", "Accuracy"});
  for (const auto& [tier, stats] : report) {
    text.add({std::string(to_string(tier)), std::to_string(stats.n), std::to_string(stats.correct),
              format_fixed(100.0 * stats.accuracy, 1) + "%"});
  }
  return text.str();
}

std::string to_json(const StratifiedReport& report) {
  ojson out = ojson::object();
  for (const auto& [tier, stats] : report) {
    out[std::string(to_string(tier))] = {{"n", stats.n}, {"correct", stats.correct}, {"accuracy", stats.accuracy}};
  }
  return out.dump(2) + "\n";
}

StratifiedReport stratified_report_from_json(std::string_view text) {
  const auto in = ojson::parse(text);
  StratifiedReport report;
  for (const auto& [name, entry] : in.items()) {
    report[tier_from_string(name)] = {entry.at("n").get<std::size_t>(), entry.at("correct").get<std::size_t>(),
                                      entry.at("accuracy").get<double>()};
  }
  return report;
}

}  // namespace chr
