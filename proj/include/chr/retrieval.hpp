#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chr/backend.hpp"
#include "chr/embedding.hpp"
#include "chr/hypothesis.hpp"

namespace chr {

inline constexpr double kDefaultLambda = 1.0;
inline constexpr std::size_t kDefaultTopK = 5;

struct Document {
  std::string id;
  std::string text;
  Embedding embedding;
};

struct DocumentView {
  std::string_view id;
  std::string_view text;
  Eigen::Ref<const Embedding> embedding;
};

// Immutable after construction. Embeddings are normalized on the way in and
// stored column-wise in one dimension x size matrix.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents);

  [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
  [[nodiscard]] bool empty() const noexcept { return ids_.empty(); }
  [[nodiscard]] std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(embeddings_.rows());
  }

  [[nodiscard]] const std::string& id(std::size_t i) const { return ids_.at(i); }
  [[nodiscard]] const std::string& text(std::size_t i) const { return texts_.at(i); }
  [[nodiscard]] auto embedding(std::size_t i) const {
    return embeddings_.col(static_cast<Eigen::Index>(i));
  }
  [[nodiscard]] const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
  [[nodiscard]] DocumentView view(std::size_t i) const;

  [[nodiscard]] std::optional<std::size_t> find(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  EmbeddingMatrix embeddings_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Method { Standard, Hyde, Query2Doc, Chr, HPlusOnly };

inline constexpr Method kAllMethods[] = {Method::Standard, Method::Hyde, Method::Query2Doc,
                                         Method::Chr, Method::HPlusOnly};

std::string_view to_string(Method method) noexcept;
// Accepts "h_plus_only" and "h-plus-only".
Method method_from_string(std::string_view name);

struct Hit {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct RankedResult {
  std::vector<Hit> hits;  // scores non-increasing, ties by ascending doc_id
  Method method = Method::Standard;
  std::optional<double> lambda;  // chr only

  friend bool operator==(const RankedResult&, const RankedResult&) = default;
};

// Documents and hypothesis embeddings are unit-norm by invariant, so cosine
// similarity reduces to the dot product.
template <typename Derived>
double contrastive_score(const Eigen::MatrixBase<Derived>& doc, const HypothesisPair& pair,
                         double lambda) {
  if (!pair.h_plus_emb) throw Error(Errc::MissingEmbedding, "H+ has no embedding");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be >= 0");
  const double target = dot(doc, *pair.h_plus_emb);
  if (!pair.h_minus_emb) return target;
  return target - lambda * dot(doc, *pair.h_minus_emb);
}

inline double contrastive_score(const Document& doc, const HypothesisPair& pair, double lambda) {
  return contrastive_score(doc.embedding, pair, lambda);
}

// H+ - lambda * H-, deliberately not renormalized. An absent H- counts as zero.
Embedding shifted_query(const HypothesisPair& pair, double lambda);

using ScoreFn = std::function<double(const DocumentView&)>;

struct ScanOptions {
  // Partitions of the exhaustive scan; per-partition top-k lists are merged
  // with the same ordering, so the result does not depend on this value.
  std::size_t workers = 1;
};

// Exhaustive scan. Throws EmptyCorpus, InvalidArgument (k == 0) and
// NonFinite (a NaN score would break the total order).
RankedResult retrieve_top_k(const ScoreFn& score, const Corpus& corpus, std::size_t k,
                            const ScanOptions& options = {});

// Ranks by dot product with an already-normalized query vector.
RankedResult retrieve_by_query(const Embedding& query, const Corpus& corpus, std::size_t k,
                               const ScanOptions& options = {});

RankedResult retrieve_chr(const HypothesisPair& pair, const Corpus& corpus, double lambda,
                          std::size_t k, const ScanOptions& options = {});

RankedResult retrieve_h_plus_only(const HypothesisPair& pair, const Corpus& corpus,
                                  std::size_t k, const ScanOptions& options = {});

// Embeds the stem only; options are not part of the query.
RankedResult retrieve_standard(const QAItem& item, const Corpus& corpus, std::size_t k,
                               EmbedderBackend& embedder, const ScanOptions& options = {});

RankedResult retrieve_hyde(std::span<const std::string> hypothesis_texts, const Corpus& corpus,
                           std::size_t k, EmbedderBackend& embedder,
                           const ScanOptions& options = {});

inline constexpr std::string_view kQuery2DocSeparator = "\n";

RankedResult retrieve_query2doc(const QAItem& item, std::string_view pseudo_doc,
                                const Corpus& corpus, std::size_t k, EmbedderBackend& embedder,
                                const ScanOptions& options = {});

}  // namespace chr
