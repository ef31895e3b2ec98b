#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "chr/embedding.hpp"
#include "chr/hypothesis.hpp"
#include "chr/retrieval.hpp"

namespace chr::test {

inline Embedding random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> gauss;
  Embedding v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = gauss(rng);
  return normalize(v);
}

inline std::string doc_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "doc%05zu", i);
  return buf;
}

inline Corpus random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<Document> docs;
  docs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) docs.push_back({doc_id(i), "text " + std::to_string(i), random_unit(rng, dim)});
  return Corpus(std::move(docs));
}

inline HypothesisPair random_pair(std::mt19937_64& rng, std::size_t dim) {
  HypothesisPair pair{"plus", "minus", random_unit(rng, dim), random_unit(rng, dim), Provenance::Injected};
  return pair;
}

inline QAItem make_item(std::string id, std::string stem, char key = 'A') {
  return {std::move(id), std::move(stem), {{'A', "alpha"}, {'B', "beta"}, {'C', "gamma"}, {'D', "delta"}}, key, ""};
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("chr_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace chr::test
