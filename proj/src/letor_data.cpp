#include "rsarank/letor_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>
#include <unordered_map>
#include <utility>

#include "rsarank/error.hpp"

namespace rsarank {

bool QueryGroup::all_same_grade() const {
  return std::adjacent_find(relevance.begin(), relevance.end(), std::not_equal_to<>()) ==
         relevance.end();
}

std::size_t Dataset::num_documents() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

const QueryGroup* Dataset::find(const std::string& qid) const {
  for (const auto& g : groups) {
    if (g.qid == qid) return &g;
  }
  return nullptr;
}

namespace {

struct SparseRow {
  int grade = 0;
  std::vector<std::pair<std::size_t, double>> entries;
};

struct PendingGroup {
  std::string qid;
  std::vector<SparseRow> rows;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view next_token(std::string_view& rest) {
  std::size_t i = 0;
  while (i < rest.size() && is_space(rest[i])) ++i;
  std::size_t j = i;
  while (j < rest.size() && !is_space(rest[j])) ++j;
  std::string_view tok = rest.substr(i, j - i);
  rest.remove_prefix(j);
  return tok;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  if constexpr (std::is_integral_v<T>) {
    if (*first == '+') ++first;  // from_chars rejects a leading '+'
  }
  auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

SparseRow parse_line(std::string_view line, std::size_t line_no, std::string& qid) {
  SparseRow row;
  std::string_view rest = line;

  std::string_view grade_tok = next_token(rest);
  if (!parse_number(grade_tok, row.grade)) {
    throw ParseError(line_no, "relevance grade '" + std::string(grade_tok) + "' is not an integer");
  }
  if (row.grade < 0) {
    throw ParseError(line_no, "negative relevance grade " + std::to_string(row.grade));
  }

  std::string_view qid_tok = next_token(rest);
  if (qid_tok.size() <= 4 || qid_tok.substr(0, 4) != "qid:") {
    throw ParseError(line_no, "expected qid:<id>, got '" + std::string(qid_tok) + "'");
  }
  qid.assign(qid_tok.substr(4));

  for (std::string_view tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
    const std::size_t colon = tok.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(line_no, "malformed feature '" + std::string(tok) + "'");
    }
    std::size_t fid = 0;
    double value = 0.0;
    if (!parse_number(tok.substr(0, colon), fid) || fid == 0) {
      throw ParseError(line_no, "feature id in '" + std::string(tok) + "' is not a positive integer");
    }
    if (!parse_number(tok.substr(colon + 1), value)) {
      throw ParseError(line_no, "feature value in '" + std::string(tok) + "' is not a number");
    }
    if (!std::isfinite(value)) {
      throw ParseError(line_no, "non-finite feature value in '" + std::string(tok) + "'");
    }
    row.entries.emplace_back(fid, value);
  }

  std::vector<std::size_t> ids;
  ids.reserve(row.entries.size());
  for (const auto& e : row.entries) ids.push_back(e.first);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw ParseError(line_no, "duplicate feature id " + std::to_string(*dup));
  }
  return row;
}

}  // namespace

Dataset parse_letor(std::istream& in, const ParseOptions& options) {
  std::vector<PendingGroup> pending;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t feature_dim = options.min_feature_dim;
  int max_grade = 0;

  std::string line;
  std::string qid;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    if (std::all_of(view.begin(), view.end(), is_space)) continue;

    SparseRow row = parse_line(view, line_no, qid);
    for (const auto& e : row.entries) feature_dim = std::max(feature_dim, e.first);
    max_grade = std::max(max_grade, row.grade);

    auto [it, inserted] = index.try_emplace(qid, pending.size());
    if (inserted) pending.push_back(PendingGroup{qid, {}});
    pending[it->second].rows.push_back(std::move(row));
  }

  Dataset dataset;
  dataset.feature_dim = feature_dim;
  dataset.k_max = std::max(max_grade, options.k_max_floor);
  dataset.groups.reserve(pending.size());
  for (auto& p : pending) {
    QueryGroup group;
    group.qid = std::move(p.qid);
    group.features = Matrix::Zero(static_cast<Eigen::Index>(p.rows.size()),
                                  static_cast<Eigen::Index>(feature_dim));
    group.relevance.reserve(p.rows.size());
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      for (const auto& [fid, value] : p.rows[r].entries) {
        group.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(fid - 1)) = value;
      }
      group.relevance.push_back(p.rows[r].grade);
    }
    dataset.groups.push_back(std::move(group));
  }
  return dataset;
}

Dataset load_letor(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_letor(in, options);
}

void write_letor(std::ostream& out, const Dataset& dataset) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& g : dataset.groups) {
    for (Eigen::Index r = 0; r < g.features.rows(); ++r) {
      out << g.relevance[static_cast<std::size_t>(r)] << " qid:" << g.qid;
      for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
        out << ' ' << (c + 1) << ':' << g.features(r, c);
      }
      out << '\n';
    }
  }
  out.precision(old_precision);
}

Dataset normalize_query_minmax(Dataset dataset) {
  for (auto& g : dataset.groups) {
    for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
      auto col = g.features.col(c);
      const double lo = col.minCoeff();
      const double hi = col.maxCoeff();
      if (hi == lo) {
        col.setZero();
      } else {
        col = ((col.array() - lo) / (hi - lo)).matrix();
      }
    }
  }
  return dataset;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats stats;
  stats.num_queries = dataset.groups.size();
  stats.grade_histogram.assign(static_cast<std::size_t>(std::max(dataset.k_max, 0)) + 1, 0);
  for (const auto& g : dataset.groups) {
    stats.num_documents += g.size();
    bool any_relevant = false;
    for (int r : g.relevance) {
      if (static_cast<std::size_t>(r) >= stats.grade_histogram.size()) {
        stats.grade_histogram.resize(static_cast<std::size_t>(r) + 1, 0);
      }
      ++stats.grade_histogram[static_cast<std::size_t>(r)];
      any_relevant = any_relevant || r > 0;
    }
    if (!any_relevant) ++stats.all_zero_queries;
  }
  stats.avg_docs_per_query =
      stats.num_queries == 0 ? 0.0
                             : static_cast<double>(stats.num_documents) /
                                   static_cast<double>(stats.num_queries);
  return stats;
}

Dataset pad_features(Dataset dataset, std::size_t dim) {
  if (dataset.feature_dim > dim) {
    throw ShapeError("dataset has " + std::to_string(dataset.feature_dim) +
                     " features, cannot pad to " + std::to_string(dim));
  }
  if (dataset.feature_dim == dim) return dataset;
  for (auto& g : dataset.groups) {
    Matrix wide = Matrix::Zero(g.features.rows(), static_cast<Eigen::Index>(dim));
    wide.leftCols(g.features.cols()) = g.features;
    g.features = std::move(wide);
  }
  dataset.feature_dim = dim;
  return dataset;
}

void validate(const Dataset& dataset) {
  std::unordered_map<std::string, int> seen;
  for (const auto& g : dataset.groups) {
    if (g.size() == 0) throw Error("query " + g.qid + " has no documents");
    if (static_cast<std::size_t>(g.features.rows()) != g.size()) {
      throw ShapeError("query " + g.qid + ": " + std::to_string(g.features.rows()) +
                       " feature rows vs " + std::to_string(g.size()) + " grades");
    }
    if (static_cast<std::size_t>(g.features.cols()) != dataset.feature_dim) {
      throw ShapeError("query " + g.qid + " has " + std::to_string(g.features.cols()) +
                       " features, dataset declares " + std::to_string(dataset.feature_dim));
    }
    if (!g.features.allFinite()) throw Error("query " + g.qid + " has non-finite features");
    for (int r : g.relevance) {
      if (r < 0 || r > dataset.k_max) {
        throw Error("query " + g.qid + " has grade " + std::to_string(r) + " outside [0, " +
                    std::to_string(dataset.k_max) + "]");
      }
    }
    if (!seen.emplace(g.qid, 0).second) throw Error("duplicate qid " + g.qid);
  }
}

}  // namespace rsarank
