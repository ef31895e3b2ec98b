// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Oracles here use plain std::vector
// arithmetic and full sorts so they share no code with the library's scan.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chr/analysis.hpp"
#include "chr/cli.hpp"
#include "chr/error.hpp"
#include "chr/io.hpp"
#include "chr/mock_backends.hpp"
#include "chr/pipeline.hpp"
#include "chr/retrieval.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace chr;
using Clock = std::chrono::steady_clock;
using Vec = std::vector<double>;

namespace {

// ---- naive reference arithmetic ----------------------------------------------------

double naive_dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec naive_normalize(Vec v) {
  const double n = std::sqrt(naive_dot(v, v));
  for (auto& x : v) x /= n;
  return v;
}

Vec to_vec(const Embedding& e) { return Vec(e.begin(), e.end()); }

Embedding to_embedding(const Vec& v) {
  Embedding e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) e[static_cast<Eigen::Index>(i)] = v[i];
  return e;
}

Vec gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  Vec v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

struct NaiveCorpus {
  std::vector<std::string> ids;
  std::vector<Vec> unit;  // normalized here, independently of Corpus
};

// Scores every document, sorts all (score, id) pairs, keeps the first k.
std::vector<std::string> oracle_top_k(const NaiveCorpus& corpus, const std::function<double(const Vec&)>& score,
                                      std::size_t k) {
  std::vector<std::pair<double, std::string>> all;
  all.reserve(corpus.ids.size());
  for (std::size_t i = 0; i < corpus.ids.size(); ++i) all.emplace_back(score(corpus.unit[i]), corpus.ids[i]);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<std::string> ids_of(const RankedResult& r) {
  std::vector<std::string> ids;
  for (const auto& h : r.hits) ids.push_back(h.doc_id);
  return ids;
}

// ---- reporting ---------------------------------------------------------------------

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, double limit_s, const std::function<Verdict()>& check) {
  const auto start = Clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  const bool in_time = limit_s <= 0.0 || elapsed < limit_s;
  const bool pass = v.pass && in_time;
  if (!pass) ++failures;
  char timing[96];
  if (limit_s > 0.0) {
    std::snprintf(timing, sizeof timing, "%.3f s, limit %.0f s", elapsed, limit_s);
  } else {
    std::snprintf(timing, sizeof timing, "%.3f s", elapsed);
  }
  std::cout << id << ' ' << (pass ? "PASS" : "FAIL") << "  " << title << ": " << v.detail << " (" << timing << ")"
            << (in_time ? "" : " [too slow]") << std::endl;
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// ---- fixture -------------------------------------------------------------------------

struct Fixture {
  std::vector<QAItem> dataset;
  HashEmbedder embedder{256};
  Corpus corpus;
  std::map<std::string, ScriptEntry> script;

  Fixture() {
    const fs::path dir = CHR_TEST_FIXTURE_DIR;
    dataset = load_dataset(dir / "dataset.jsonl");
    corpus = load_corpus(dir / "corpus.jsonl", &embedder);
    script = load_mock_script(dir / "mock_script.jsonl", dataset);
  }
};

BenchmarkConfig frozen(Method method) {
  BenchmarkConfig c;
  c.method = method;
  c.clock = [] { return std::int64_t{0}; };
  return c;
}

// ---- A1 ----------------------------------------------------------------------------------

Verdict a1_equivalence() {
  std::mt19937_64 rng(101);
  constexpr std::size_t kTrials = 10000;
  constexpr std::size_t kDim = 64;
  double worst = 0.0;
  std::size_t evaluations = 0;
  for (std::size_t t = 0; t < kTrials; ++t) {
    const auto d = naive_normalize(gaussian(rng, kDim));
    HypothesisPair pair{"", "", to_embedding(naive_normalize(gaussian(rng, kDim))),
                        to_embedding(naive_normalize(gaussian(rng, kDim))), Provenance::Injected};
    const auto de = to_embedding(d);
    for (const double lambda : {0.0, 0.5, 1.0, 1.4}) {
      const double score = contrastive_score(de, pair, lambda);
      const double shifted = dot(de, shifted_query(pair, lambda));
      worst = std::max(worst, std::abs(score - shifted));
      ++evaluations;
    }
  }
  return {worst <= 1e-9, fmt("max |score - dot(d, shifted)| = %.3g over %zu evaluations (tol 1e-9)", worst, evaluations)};
}

// ---- A2 ----------------------------------------------------------------------------------

Verdict a2_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> dims(16, 256);
  constexpr std::size_t kCorpora = 100, kDocs = 1000, kTop = 5;
  std::size_t checks = 0, mismatches = 0;
  std::string first_mismatch;

  for (std::size_t c = 0; c < kCorpora; ++c) {
    const auto dim = c == 0 ? 16 : c == 1 ? 256 : dims(rng);
    NaiveCorpus naive;
    std::vector<Document> docs;
    for (std::size_t i = 0; i < kDocs; ++i) {
      // Every 50th document duplicates an earlier vector to exercise the tie rule.
      const auto raw = (i % 50 == 49) ? to_vec(docs[i - 7].embedding) : gaussian(rng, dim);
      naive.ids.push_back(chr::test::doc_id((i * 7919) % kDocs));
      naive.unit.push_back(naive_normalize(raw));
      docs.push_back({naive.ids.back(), "", to_embedding(raw)});
    }
    const Corpus corpus(docs);
    HashEmbedder embedder(dim, c);
    const ScanOptions scan{.workers = 1 + c % 4};

    const auto compare = [&](const char* method, const RankedResult& got, const std::vector<std::string>& expected) {
      ++checks;
      if (ids_of(got) != expected) {
        ++mismatches;
        if (first_mismatch.empty()) first_mismatch = fmt(" first mismatch: %s on corpus %zu", method, c);
      }
    };

    // Standard: the stem alone.
    const auto item = chr::test::make_item("q", "query words number " + std::to_string(c));
    const auto stem_q = naive_normalize(to_vec(embedder.embed(item.stem)));
    compare("standard", retrieve_standard(item, corpus, kTop, embedder, scan),
            oracle_top_k(naive, [&](const Vec& d) { return naive_dot(d, stem_q); }, kTop));

    // HyDE: mean of N normalized hypothesis embeddings, renormalized.
    std::vector<std::string> passages;
    Vec mean(dim, 0.0);
    for (int n = 0; n < 8; ++n) {
      passages.push_back("passage " + std::to_string(n) + " about topic " + std::to_string(c));
      const auto e = naive_normalize(to_vec(embedder.embed(passages.back())));
      for (std::size_t i = 0; i < dim; ++i) mean[i] += e[i] / 8.0;
    }
    mean = naive_normalize(mean);
    compare("hyde", retrieve_hyde(passages, corpus, kTop, embedder, scan),
            oracle_top_k(naive, [&](const Vec& d) { return naive_dot(d, mean); }, kTop));

    // Query2Doc: stem and pseudo-document embedded together.
    const std::string pseudo = "pseudo document text " + std::to_string(c);
    const auto q2d = naive_normalize(to_vec(embedder.embed(item.stem + "\n" + pseudo)));
    compare("query2doc", retrieve_query2doc(item, pseudo, corpus, kTop, embedder, scan),
            oracle_top_k(naive, [&](const Vec& d) { return naive_dot(d, q2d); }, kTop));

    // CHR and H+-only on random hypothesis pairs.
    const auto hp = naive_normalize(gaussian(rng, dim));
    const auto hm = naive_normalize(gaussian(rng, dim));
    const HypothesisPair pair{"", "", to_embedding(hp), to_embedding(hm), Provenance::Injected};
    for (const double lambda : {0.5, 1.0, 1.4}) {
      compare("chr", retrieve_chr(pair, corpus, lambda, kTop, scan),
              oracle_top_k(naive, [&](const Vec& d) { return naive_dot(d, hp) - lambda * naive_dot(d, hm); }, kTop));
    }
    compare("h_plus_only", retrieve_h_plus_only(pair, corpus, kTop, scan),
            oracle_top_k(naive, [&](const Vec& d) { return naive_dot(d, hp); }, kTop));
  }
  return {mismatches == 0,
          fmt("%zu/%zu top-5 lists identical to the full-sort oracle across %zu corpora of %zu docs%s",
              checks - mismatches, checks, kCorpora, kDocs, first_mismatch.c_str())};
}

// ---- A3 ----------------------------------------------------------------------------------

Verdict a3_reduction(const Fixture& f) {
  // Random corpora: hit lists including scores.
  std::mt19937_64 rng(303);
  std::size_t random_equal = 0;
  constexpr std::size_t kRandom = 50;
  for (std::size_t t = 0; t < kRandom; ++t) {
    const auto corpus = chr::test::random_corpus(rng, 500, 32);
    const auto pair = chr::test::random_pair(rng, 32);
    random_equal += retrieve_chr(pair, corpus, 0.0, 5).hits == retrieve_h_plus_only(pair, corpus, 5).hits;
  }

  // Fixture: sweep point at lambda 0 versus an independently run H+-only benchmark.
  ScriptedGenerator expander_a(f.script), answerer_a;
  HashEmbedder embedder_a(256);
  const auto sweep = lambda_sweep(f.dataset, {0.0}, f.corpus, frozen(Method::Chr), {expander_a, answerer_a, embedder_a});

  ScriptedGenerator expander_b(f.script), answerer_b;
  HashEmbedder embedder_b(256);
  const auto plus = run_benchmark(f.dataset, f.corpus, frozen(Method::HPlusOnly), {expander_b, answerer_b, embedder_b});

  const auto& swept = sweep.runs.at(0).records;
  std::size_t record_equal = 0;
  for (std::size_t i = 0; i < plus.records.size(); ++i) {
    const auto& a = swept[i];
    const auto& b = plus.records[i];
    record_equal += a.item_id == b.item_id && a.ranked.hits == b.ranked.hits && a.predicted == b.predicted &&
                    a.correct == b.correct;
  }
  const bool pass = random_equal == kRandom && record_equal == plus.records.size() && swept.size() == plus.records.size() &&
                    sweep.report.points[0].accuracy == plus.summary.accuracy;
  return {pass, fmt("retrieve_chr(lambda=0) == H+-only on %zu/%zu random corpora; sweep lambda=0 matches H+-only "
                    "benchmark on %zu/%zu fixture records (accuracy %.3f vs %.3f)",
                    random_equal, kRandom, record_equal, plus.records.size(), sweep.report.points[0].accuracy,
                    plus.summary.accuracy)};
}

// ---- A4 ----------------------------------------------------------------------------------

Verdict a4_hard_negatives() {
  constexpr std::size_t kDim = 128, kCluster = 30, kNoise = 940, kSeeds = 20;
  constexpr double kSpread = 0.05;
  std::size_t worst_mimic_at_0 = kCluster, worst_target_at_1 = kCluster;
  std::size_t passing = 0;

  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(4000 + seed);
    Vec t(kDim, 0.0), m(kDim, 0.0);
    t[0] = 1.0;
    m[0] = 0.8;
    m[1] = 0.6;  // cos(t, m) = 0.8
    const auto near = [&](const Vec& center) {
      auto offset = naive_normalize(gaussian(rng, kDim));
      Vec v = center;
      for (std::size_t i = 0; i < kDim; ++i) v[i] += kSpread * offset[i];
      return v;
    };
    std::vector<Document> docs;
    for (std::size_t i = 0; i < kCluster; ++i) docs.push_back({fmt("T%02zu", i), "", to_embedding(near(t))});
    for (std::size_t i = 0; i < kCluster; ++i) docs.push_back({fmt("M%02zu", i), "", to_embedding(near(m))});
    for (std::size_t i = 0; i < kNoise; ++i) docs.push_back({fmt("N%03zu", i), "", to_embedding(gaussian(rng, kDim))});
    const Corpus corpus(std::move(docs));

    Vec hp(kDim);
    for (std::size_t i = 0; i < kDim; ++i) hp[i] = 0.4 * t[i] + 0.6 * m[i];
    const HypothesisPair pair{"", "", to_embedding(naive_normalize(hp)), to_embedding(m), Provenance::Injected};

    const auto count_prefix = [](const RankedResult& r, char prefix) {
      return static_cast<std::size_t>(
          std::count_if(r.hits.begin(), r.hits.end(), [&](const Hit& h) { return h.doc_id.front() == prefix; }));
    };
    const auto mimic_at_0 = count_prefix(retrieve_chr(pair, corpus, 0.0, 5), 'M');
    const auto target_at_1 = count_prefix(retrieve_chr(pair, corpus, 1.0, 5), 'T');
    worst_mimic_at_0 = std::min(worst_mimic_at_0, mimic_at_0);
    worst_target_at_1 = std::min(worst_target_at_1, target_at_1);
    passing += mimic_at_0 >= 4 && target_at_1 >= 4;
  }
  return {passing == kSeeds, fmt("%zu/%zu seeded corpora pass; worst case %zu/5 mimic hits at lambda=0, %zu/5 target "
                                 "hits at lambda=1 (need >= 4 each)",
                                 passing, kSeeds, worst_mimic_at_0, worst_target_at_1)};
}

// ---- A5 ----------------------------------------------------------------------------------

Verdict a5_overlap() {
  std::vector<EvalRecord> a, b;
  const auto make = [](const std::string& id, Method method, bool correct, const std::string& prefix,
                       const std::string& dataset) {
    EvalRecord r;
    r.item_id = id;
    r.dataset = dataset;
    r.method = method;
    r.correct = correct;
    for (int j = 0; j < 5; ++j) r.ranked.hits.push_back({prefix + std::to_string(j), 1.0 - 0.1 * j});
    return r;
  };
  for (int i = 0; i < 10; ++i) {
    const auto id = fmt("case%02d", i);
    const auto dataset = i % 2 == 0 ? "MedQA" : "MMLU-Med";
    a.push_back(make(id, Method::Chr, true, id + "-a", dataset));
    b.push_back(make(id, Method::Hyde, false, i < 8 ? id + "-b" : id + "-a", dataset));
  }
  const auto single = retrieval_shift(a, b, 5);
  const auto table = retrieval_shift_table(a, b, 5);
  const auto text = render_text(table);
  const bool layout = table.rows.size() == 2 && table.rows[0].label == "MMLU-Med" && table.rows[1].label == "MedQA" &&
                      table.combined.label == "Combined" && text.find("Combined") != std::string::npos &&
                      text.find("MedQA") != std::string::npos && text.find("MMLU-Med") != std::string::npos &&
                      text.find("80.0%") != std::string::npos;
  const bool pass = single.n == 10 && single.zero_overlap_pct == 80.0 && std::abs(single.mean_overlap - 0.2) < 1e-15 &&
                    table.combined.zero_overlap_pct == 80.0 && std::abs(table.combined.mean_overlap - 0.2) < 1e-15 &&
                    layout;
  return {pass, fmt("n=%zu zero_overlap_pct=%.1f mean_overlap=%.17g; %zu dataset rows + Combined", single.n,
                    single.zero_overlap_pct, single.mean_overlap, table.rows.size())};
}

// ---- A6 ----------------------------------------------------------------------------------

Verdict a6_cost(const Fixture& f) {
  std::vector<EvalRecord> all;
  std::map<Method, std::pair<std::uint64_t, std::uint64_t>> observed;  // min/max calls per question
  bool counters_agree = true;
  for (const auto method : {Method::Chr, Method::Query2Doc, Method::Hyde, Method::Standard}) {
    ScriptedGenerator expander(f.script), answerer;
    HashEmbedder embedder(256);
    const auto run = run_benchmark(f.dataset, f.corpus, frozen(method), {expander, answerer, embedder});
    std::uint64_t lo = UINT64_MAX, hi = 0, sum = 0;
    for (const auto& r : run.records) {
      lo = std::min(lo, r.cost.llm_calls);
      hi = std::max(hi, r.cost.llm_calls);
      sum += r.cost.llm_calls;
    }
    counters_agree = counters_agree && sum == expander.calls();
    observed[method] = {lo, hi};
    all.insert(all.end(), run.records.begin(), run.records.end());
  }
  const auto exact = [&](Method m, std::uint64_t n) { return observed[m].first == n && observed[m].second == n; };
  const bool calls = exact(Method::Chr, 1) && exact(Method::Query2Doc, 1) && exact(Method::Hyde, 8) &&
                     exact(Method::Standard, 0);

  const auto cost = cost_report(all);
  // Recompute token means from the raw records.
  std::map<Method, std::pair<double, double>> sums;
  for (const auto& r : all) {
    sums[r.method].first += static_cast<double>(r.cost.output_tokens);
    sums[r.method].second += 1.0;
  }
  double ref_mean = 0.0;
  for (const auto& [m, s] : sums) ref_mean = std::max(ref_mean, s.first / s.second);
  bool reductions = cost.per_method.at(cost.reference).token_reduction == 1.0;
  std::string listing;
  for (const auto& [m, s] : sums) {
    const double mean = s.first / s.second;
    const auto& got = cost.per_method.at(m).token_reduction;
    if (mean == 0.0) {
      reductions = reductions && !got;
      continue;
    }
    reductions = reductions && got && format_significant(*got, 3) == format_significant(ref_mean / mean, 3);
    listing += fmt(" %s=%s", std::string(to_string(m)).c_str(), format_significant(*got, 3).c_str());
  }
  return {calls && reductions && counters_agree,
          fmt("calls/question chr=%llu query2doc=%llu hyde=%llu standard=%llu; reference %s = 1.0; reductions%s",
              (unsigned long long)observed[Method::Chr].second, (unsigned long long)observed[Method::Query2Doc].second,
              (unsigned long long)observed[Method::Hyde].second, (unsigned long long)observed[Method::Standard].second,
              std::string(to_string(cost.reference)).c_str(), listing.c_str())};
}

// ---- A7 ----------------------------------------------------------------------------------

Verdict a7_stratified() {
  std::vector<EvalRecord> records;
  Ratings ratings;
  const auto add = [&](Tier tier, int n, int correct) {
    for (int i = 0; i < n; ++i) {
      EvalRecord r;
      r.item_id = std::string(to_string(tier)) + std::to_string(i);
      r.correct = i < correct;
      records.push_back(r);
      ratings.tiers[r.item_id] = tier;
    }
  };
  add(Tier::Excellent, 9, 6);
  add(Tier::Good, 30, 12);
  add(Tier::Poor, 8, 3);
  const auto result = stratified_accuracy(records, ratings);
  const auto pct = [&](Tier t) { return format_fixed(100.0 * result.at(t).accuracy, 1); };
  const bool pass = pct(Tier::Excellent) == "66.7" && pct(Tier::Good) == "40.0" && pct(Tier::Poor) == "37.5";
  return {pass, "Excellent " + pct(Tier::Excellent) + "%, Good " + pct(Tier::Good) + "%, Poor " + pct(Tier::Poor) +
                    "% (expected 66.7 / 40.0 / 37.5)"};
}

// ---- A8 ----------------------------------------------------------------------------------

struct FuzzCase {
  std::string raw;
  std::string h_plus;
  std::string h_minus;
};

std::vector<FuzzCase> valid_corpus() {
  const std::vector<std::string> texts{
      "Pulmonary embolism with pleuritic pain",
      "Uses \"quoted\" terms and a backslash \\ here",
      "Braces { inside } text and ] brackets [",
      "Line one\nline two\ttabbed",
      "Unicode: myocardite, Basedow, 甲状腺",
      "Contains ```fences``` inline",
      "Trailing spaces   ",
      "{\"H_plus\": \"nested looking\"}",
  };
  const std::vector<std::function<std::string(const std::string&)>> wrappers{
      [](const std::string& j) { return j; },
      [](const std::string& j) { return "```json\n" + j + "\n```"; },
      [](const std::string& j) { return "```\n" + j + "\n```"; },
      [](const std::string& j) { return "Here is the JSON you asked for:\n" + j + "\nLet me know if you need more."; },
      [](const std::string& j) { return "\n\n   \t" + j + "  \r\n"; },
      [](const std::string& j) { return "Sure! ```json " + j + " ``` Hope this helps {not json}."; },
      [](const std::string& j) { return "Thinking... {\"draft\": true}\nFinal: " + j; },
      [](const std::string& j) { return "Output:\r\n```JSON\r\n" + j + "\r\n```\r\n"; },
  };
  std::vector<FuzzCase> cases;
  std::mt19937_64 rng(808);
  for (std::size_t i = 0; cases.size() < 200; ++i) {
    const auto& plus = texts[i % texts.size()];
    const auto& minus = texts[(i * 3 + 1) % texts.size()];
    nlohmann::ordered_json object;
    if (i % 3 == 1) {
      object["H_minus"] = minus;
      object["H_plus"] = plus;
    } else {
      object["H_plus"] = plus;
      object["H_minus"] = minus;
    }
    if (i % 5 == 2) object["confidence"] = 0.9;
    const auto json = (i % 4 == 3) ? object.dump(2) : object.dump();
    cases.push_back({wrappers[(i / texts.size() + i) % wrappers.size()](json), plus, minus});
  }
  return cases;
}

std::vector<std::string> malformed_corpus() {
  const std::vector<std::string> seeds{
      "no json here",
      "",
      "   ",
      "{\"H_plus\": \"unterminated",
      "{\"H_plus\": \"a\", \"H_minus\": \"b\"",
      "{'H_plus': 'single quotes', 'H_minus': 'x'}",
      "{\"H_minus\": \"only the negative\"}",
      "{\"H_plus\": \"\", \"H_minus\": \"empty positive\"}",
      "{\"H_plus\": \"   \", \"H_minus\": \"blank positive\"}",
      "{\"H_plus\": 42, \"H_minus\": \"numeric\"}",
      "{\"H_plus\": null}",
      "{\"H_plus\": [\"array\"]}",
      "[\"H_plus\", \"inside array\"]",
      "H_plus: plain text, H_minus: more text",
      "```json\n```",
      "{H_plus: unquoted}",
      "}{",
      "{\"h_plus\": \"wrong case\"}",
      "{\"H_plus\" \"missing colon\"}",
      "{\"H_plus\": \"trailing comma\",}",
      "{\"Hplus\": \"typo\"}",
      "{\"H_plus\": \"bad escape \\q\"}",
      "{\"H_plus\": {\"nested\": \"object\"}}",
      "The answer is obviously B.",
      "{\"H_plus\": true, \"H_minus\": false}",
  };
  std::vector<std::string> cases;
  for (std::size_t i = 0; cases.size() < 50; ++i) {
    const auto& base = seeds[i % seeds.size()];
    cases.push_back(i < seeds.size() ? base : "Response " + std::to_string(i) + ": " + base);
  }
  return cases;
}

Verdict a8_parser() {
  std::size_t parsed = 0;
  const auto valid = valid_corpus();
  for (const auto& c : valid) {
    try {
      const auto pair = parse_pair(c.raw);
      parsed += pair.h_plus == c.h_plus && pair.h_minus == c.h_minus;
    } catch (const Error&) {
    }
  }

  std::mt19937_64 rng(909);
  const auto corpus = chr::test::random_corpus(rng, 400, 64);
  HashEmbedder embedder(64);
  std::size_t fell_back = 0, reduced = 0;
  const auto malformed = malformed_corpus();
  const QAItem item = chr::test::make_item("q", "Which diagnosis explains the findings?");
  for (const auto& raw : malformed) {
    auto backend = make_constant_generator(raw);
    const auto out = generate_pair(item, *backend);
    const bool ok = out.pair.provenance == Provenance::Fallback && out.pair.h_minus.empty() &&
                    out.cost.llm_calls == 3 && backend->calls() == 3;
    fell_back += ok;
    if (!ok) continue;
    const auto embedded = embed_pair(out.pair, embedder);
    bool same = !embedded.h_minus_emb.has_value();
    for (const double lambda : {0.5, 1.0, 1.4}) {
      same = same && retrieve_chr(embedded, corpus, lambda, 5).hits == retrieve_h_plus_only(embedded, corpus, 5).hits;
    }
    reduced += same;
  }
  const bool pass = parsed == valid.size() && fell_back == malformed.size() && reduced == malformed.size();
  return {pass, fmt("parsed %zu/%zu wrapped valid replies; retry-then-fallback on %zu/%zu malformed replies; "
                    "%zu/%zu fallbacks retrieve exactly like H+-only",
                    parsed, valid.size(), fell_back, malformed.size(), reduced, malformed.size())};
}

// ---- A9 ----------------------------------------------------------------------------------

Verdict a9_smoke() {
  chr::test::TempDir first("acc_a"), second("acc_b");
  std::ostringstream out, err;
  const int code_a = run_cli({"run", "--mock", "--seed", "0", "--out", first.path().string()}, out, err);
  const int code_b = run_cli({"run", "--mock", "--seed", "0", "--out", second.path().string()}, out, err);
  if (code_a != 0 || code_b != 0) return {false, "run --mock exited nonzero: " + err.str()};

  std::vector<std::string> expected{"summary.json", "overlap.json", "cost.json", "sweep.json", "stratify.json"};
  for (const auto m : kAllMethods) expected.push_back("records." + std::string(to_string(m)) + ".jsonl");
  std::size_t present = 0, identical = 0, record_lines = 0;
  for (const auto& name : expected) {
    if (!fs::exists(first / name)) continue;
    ++present;
    identical += fs::exists(second / name) && read_file(first / name) == read_file(second / name);
    if (name.starts_with("records.")) record_lines += load_records(first / name).size();
  }
  std::size_t total_files = 0, identical_files = 0;
  for (const auto& entry : fs::directory_iterator(first.path())) {
    ++total_files;
    const auto other = second / entry.path().filename().string();
    identical_files += fs::exists(other) && read_file(entry.path()) == read_file(other);
  }
  const bool pass = present == expected.size() && identical == expected.size() && record_lines == 5 * 20 &&
                    identical_files == total_files;
  return {pass, fmt("%zu/%zu required outputs present (5 record files, summary, 4 reports), %zu records, "
                    "%zu/%zu files byte-identical across two runs",
                    present, expected.size(), record_lines, identical_files, total_files)};
}

}  // namespace

int main() {
  const Fixture fixture;
  report("A1", "score/shifted-query equivalence", 1.0, a1_equivalence);
  report("A2", "top-K oracle equivalence", 30.0, a2_oracle);
  report("A3", "lambda=0 reduction", 0.0, [&] { return a3_reduction(fixture); });
  report("A4", "hard-negative suppression", 5.0, a4_hard_negatives);
  report("A5", "overlap analytics", 0.0, a5_overlap);
  report("A6", "cost accounting", 0.0, [&] { return a6_cost(fixture); });
  report("A7", "stratified accuracy", 0.0, a7_stratified);
  report("A8", "parser robustness", 0.0, a8_parser);
  report("A9", "offline end-to-end smoke", 10.0, a9_smoke);
  std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
