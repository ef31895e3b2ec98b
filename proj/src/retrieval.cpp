#include "chr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace chr {

Corpus::Corpus(std::vector<Document> documents) {
  if (documents.empty()) return;
  const auto dim = documents.front().embedding.size();
  if (dim == 0) throw Error(Errc::DimensionMismatch, "document embedding has dimension 0");

  embeddings_.resize(dim, static_cast<Eigen::Index>(documents.size()));
  ids_.reserve(documents.size());
  texts_.reserve(documents.size());
  index_.reserve(documents.size());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    auto& doc = documents[i];
    if (doc.embedding.size() != dim) {
      throw Error(Errc::DimensionMismatch, "document '" + doc.id + "' has dimension " +
                                               std::to_string(doc.embedding.size()) +
                                               ", corpus has " + std::to_string(dim));
    }
    if (!index_.emplace(doc.id, i).second) {
      throw Error(Errc::DuplicateId, "document id '" + doc.id + "' appears twice");
    }
    embeddings_.col(static_cast<Eigen::Index>(i)) = normalize(doc.embedding);
    ids_.push_back(std::move(doc.id));
    texts_.push_back(std::move(doc.text));
  }
}

DocumentView Corpus::view(std::size_t i) const {
  return DocumentView{ids_.at(i), texts_.at(i), embeddings_.col(static_cast<Eigen::Index>(i))};
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Standard: return "standard";
    case Method::Hyde: return "hyde";
    case Method::Query2Doc: return "query2doc";
    case Method::Chr: return "chr";
    case Method::HPlusOnly: return "h_plus_only";
  }
  return "standard";
}

Method method_from_string(std::string_view name) {
  if (name == "standard") return Method::Standard;
  if (name == "hyde") return Method::Hyde;
  if (name == "query2doc") return Method::Query2Doc;
  if (name == "chr") return Method::Chr;
  if (name == "h_plus_only" || name == "h-plus-only") return Method::HPlusOnly;
  throw Error(Errc::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

Embedding shifted_query(const HypothesisPair& pair, double lambda) {
  if (!pair.h_plus_emb) throw Error(Errc::MissingEmbedding, "H+ has no embedding");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be >= 0");
  if (!pair.h_minus_emb) return *pair.h_plus_emb;
  require_same_dimension(*pair.h_plus_emb, *pair.h_minus_emb);
  return *pair.h_plus_emb - lambda * *pair.h_minus_emb;
}

namespace {

struct Scored {
  double score;
  std::size_t index;
};

// Higher score first, then ascending doc id. A strict total order since ids
// are unique.
struct RankOrder {
  const Corpus* corpus;
  bool operator()(const Scored& a, const Scored& b) const {
    if (a.score != b.score) return a.score > b.score;
    return corpus->id(a.index) < corpus->id(b.index);
  }
};

void keep_top_k(std::vector<Scored>& scored, std::size_t k, const RankOrder& order) {
  const auto keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), order);
  scored.resize(keep);
}

std::vector<Scored> scan_range(const ScoreFn& score, const Corpus& corpus, std::size_t begin,
                               std::size_t end, std::size_t k) {
  std::vector<Scored> scored;
  scored.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const double s = score(corpus.view(i));
    if (std::isnan(s)) {
      throw Error(Errc::NonFinite, "score for document '" + corpus.id(i) + "' is NaN");
    }
    scored.push_back({s, i});
  }
  keep_top_k(scored, k, RankOrder{&corpus});
  return scored;
}

}  // namespace

RankedResult retrieve_top_k(const ScoreFn& score, const Corpus& corpus, std::size_t k,
                            const ScanOptions& options) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot retrieve from an empty corpus");
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");

  const std::size_t n = corpus.size();
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n);
  std::vector<Scored> merged;

  if (workers == 1) {
    merged = scan_range(score, corpus, 0, n, k);
  } else {
    std::vector<std::vector<Scored>> partial(workers);
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          try {
            partial[w] = scan_range(score, corpus, n * w / workers, n * (w + 1) / workers, k);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
    for (auto& part : partial) merged.insert(merged.end(), part.begin(), part.end());
    keep_top_k(merged, k, RankOrder{&corpus});
  }

  RankedResult result;
  result.hits.reserve(merged.size());
  for (const auto& s : merged) result.hits.push_back({corpus.id(s.index), s.score});
  return result;
}

RankedResult retrieve_by_query(const Embedding& query, const Corpus& corpus, std::size_t k,
                               const ScanOptions& options) {
  if (!corpus.empty()) require_same_dimension(query, corpus.embedding(0));
  return retrieve_top_k([&](const DocumentView& d) { return dot(d.embedding, query); }, corpus, k,
                        options);
}

RankedResult retrieve_chr(const HypothesisPair& pair, const Corpus& corpus, double lambda,
                          std::size_t k, const ScanOptions& options) {
  if (!pair.h_plus_emb) throw Error(Errc::MissingEmbedding, "H+ has no embedding");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be >= 0");
  auto result = retrieve_top_k(
      [&](const DocumentView& d) { return contrastive_score(d.embedding, pair, lambda); }, corpus,
      k, options);
  result.method = Method::Chr;
  result.lambda = lambda;
  return result;
}

RankedResult retrieve_h_plus_only(const HypothesisPair& pair, const Corpus& corpus,
                                  std::size_t k, const ScanOptions& options) {
  if (!pair.h_plus_emb) throw Error(Errc::MissingEmbedding, "H+ has no embedding");
  auto result = retrieve_by_query(*pair.h_plus_emb, corpus, k, options);
  result.method = Method::HPlusOnly;
  return result;
}

RankedResult retrieve_standard(const QAItem& item, const Corpus& corpus, std::size_t k,
                               EmbedderBackend& embedder, const ScanOptions& options) {
  auto result = retrieve_by_query(embed_text(embedder, item.stem), corpus, k, options);
  result.method = Method::Standard;
  return result;
}

RankedResult retrieve_hyde(std::span<const std::string> hypothesis_texts, const Corpus& corpus,
                           std::size_t k, EmbedderBackend& embedder,
                           const ScanOptions& options) {
  if (hypothesis_texts.empty()) throw Error(Errc::EmptyList, "HyDE needs at least one hypothesis");
  std::vector<Embedding> embeddings;
  embeddings.reserve(hypothesis_texts.size());
  for (const auto& text : hypothesis_texts) embeddings.push_back(embed_text(embedder, text));
  auto result = retrieve_by_query(mean_embedding(embeddings), corpus, k, options);
  result.method = Method::Hyde;
  return result;
}

RankedResult retrieve_query2doc(const QAItem& item, std::string_view pseudo_doc,
                                const Corpus& corpus, std::size_t k, EmbedderBackend& embedder,
                                const ScanOptions& options) {
  if (pseudo_doc.empty()) throw Error(Errc::InvalidArgument, "Query2Doc pseudo-document is empty");
  std::string query = item.stem;
  query += kQuery2DocSeparator;
  query += pseudo_doc;
  auto result = retrieve_by_query(embed_text(embedder, query), corpus, k, options);
  result.method = Method::Query2Doc;
  return result;
}

}  // namespace chr
