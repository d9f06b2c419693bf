#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsarank/tensor.hpp"

namespace rsarank {

/// One query's candidate documents: an n x d feature matrix and n integer
/// relevance grades, rows in file order.
struct QueryGroup {
  std::string qid;
  Matrix features;
  std::vector<int> relevance;

  std::size_t size() const { return relevance.size(); }
  bool all_same_grade() const;
};

struct Dataset {
  std::vector<QueryGroup> groups;
  std::size_t feature_dim = 0;
  int k_max = 0;

  std::size_t num_documents() const;
  const QueryGroup* find(const std::string& qid) const;
};

struct ParseOptions {
  // k_max is raised to at least this value; 0 takes k_max purely from data.
  int k_max_floor = 4;
  // Lower bound on feature_dim, for files whose highest feature ids are all
  // absent (sparse zeros).
  std::size_t min_feature_dim = 0;
};

struct DatasetStats {
  std::size_t num_queries = 0;
  std::size_t num_documents = 0;
  double avg_docs_per_query = 0.0;
  std::vector<std::size_t> grade_histogram;  // index = grade, 0..k_max
  std::size_t all_zero_queries = 0;          // kept for training, reported here
};

/// Reads LETOR / SVM-light ranking text: `<grade> qid:<id> <fid>:<val> ... [# comment]`.
/// Absent features are 0.0. Rows sharing a qid form one group in first-seen
/// order; within a group rows keep file order. Throws ParseError with the
/// 1-based line number on malformed input.
Dataset parse_letor(std::istream& in, const ParseOptions& options = {});
Dataset load_letor(const std::filesystem::path& path, const ParseOptions& options = {});

/// Dense LETOR text, every feature written, max_digits10 precision.
void write_letor(std::ostream& out, const Dataset& dataset);

/// Per query and per column: x' = (x - min) / (max - min); constant columns
/// become 0. Relevance is untouched.
Dataset normalize_query_minmax(Dataset dataset);

DatasetStats dataset_stats(const Dataset& dataset);

/// Zero-pads every group to `dim` columns. Throws ShapeError if the dataset
/// is already wider.
Dataset pad_features(Dataset dataset, std::size_t dim);

void validate(const Dataset& dataset);

}  // namespace rsarank
