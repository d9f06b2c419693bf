#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsarank/letor_data.hpp"
#include "rsarank/model.hpp"

namespace rsarank {

inline constexpr std::array<int, 4> kCutoffs = {1, 3, 5, 10};

/// Grades listed in predicted order. DCG@k = sum_{i<=min(k,n)} (2^g_i - 1) / log2(i + 1),
/// normalized by the grade-descending DCG; 0 when that ideal DCG is 0.
double ndcg_at_k(std::span<const int> ranked_grades, int k);

/// Cascade model with stop probability R_i = (2^g_i - 1) / 2^g_max:
/// ERR@k = sum_{r<=min(k,n)} (1/r) R_r prod_{j<r} (1 - R_j).
double err_at_k(std::span<const int> ranked_grades, int k, int g_max);

/// Document indices sorted by descending score; ties keep input order.
std::vector<std::size_t> rank_by_score(const Vector& scores);
std::vector<int> ranked_grades(const Vector& scores, std::span<const int> grades);

struct QueryMetrics {
  std::string qid;
  std::array<double, 4> err{};   // at kCutoffs
  std::array<double, 4> ndcg{};  // at kCutoffs
};

struct MetricReport {
  std::vector<QueryMetrics> per_query;
  std::array<double, 4> mean_err{};
  std::array<double, 4> mean_ndcg{};

  std::size_t query_count() const { return per_query.size(); }
  /// k must be one of kCutoffs.
  double ndcg(int k) const;
  double err(int k) const;
  std::vector<double> per_query_ndcg(int k) const;
  std::vector<double> per_query_err(int k) const;
  void recompute_means();
};

struct TTestResult {
  double t = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Two-sided paired t-test on d = a - b. Zero-variance differences give
/// p = 1 when the mean is 0 and p = 0 otherwise. Throws Error if the
/// lengths differ or fewer than two pairs are given.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

using Scorer = std::function<Vector(const QueryGroup&)>;

/// ERR and NDCG at 1, 3, 5, 10 for every group, g_max = dataset.k_max.
MetricReport evaluate(const Scorer& scorer, const Dataset& dataset);
MetricReport evaluate(const RsaModel& model, const Dataset& dataset);
MetricReport evaluate_scores(const std::vector<Vector>& scores, const Dataset& dataset);

/// Table laid out as: system, ERR@1, NDCG@1, ..., ERR@10, NDCG@10 (tab separated).
void write_report_table(std::ostream& out, const MetricReport& report, std::string_view system);
/// One row per query with full precision, same column order, qid first.
void write_per_query(std::ostream& out, const MetricReport& report);
MetricReport read_per_query(std::istream& in);

struct SignificanceRow {
  std::string metric;  // e.g. "NDCG@10"
  double mean_a = 0.0;
  double mean_b = 0.0;
  TTestResult test;
};

/// Paired t-test for every metric/cutoff column; queries matched by position
/// and required to carry identical qids.
std::vector<SignificanceRow> compare_systems(const MetricReport& a, const MetricReport& b);
void write_significance(std::ostream& out, const std::vector<SignificanceRow>& rows);

}  // namespace rsarank
