#include "rsarank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "rsarank/error.hpp"

namespace rsarank {

namespace {

void check_cutoff(int k) {
  if (k < 1) throw Error("metric cutoff k must be >= 1, got " + std::to_string(k));
}

double gain(int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; }

double dcg(std::span<const int> grades, std::size_t depth) {
  double total = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    total += gain(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

std::size_t cutoff_index(int k) {
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    if (kCutoffs[i] == k) return i;
  }
  throw Error("reported cutoffs are 1, 3, 5, 10; got " + std::to_string(k));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double ndcg_at_k(std::span<const int> ranked_grades, int k) {
  check_cutoff(k);
  const std::size_t depth = std::min(static_cast<std::size_t>(k), ranked_grades.size());
  std::vector<int> ideal(ranked_grades.begin(), ranked_grades.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, depth);
  if (idcg == 0.0) return 0.0;
  return dcg(ranked_grades, depth) / idcg;
}

double err_at_k(std::span<const int> ranked_grades, int k, int g_max) {
  check_cutoff(k);
  const std::size_t depth = std::min(static_cast<std::size_t>(k), ranked_grades.size());
  const double max_gain = std::exp2(static_cast<double>(g_max));
  double err = 0.0;
  double keep_going = 1.0;
  for (std::size_t r = 0; r < depth; ++r) {
    const double stop = gain(ranked_grades[r]) / max_gain;
    err += keep_going * stop / static_cast<double>(r + 1);
    keep_going *= 1.0 - stop;
  }
  return err;
}

std::vector<std::size_t> rank_by_score(const Vector& scores) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  return order;
}

std::vector<int> ranked_grades(const Vector& scores, std::span<const int> grades) {
  if (static_cast<std::size_t>(scores.size()) != grades.size()) {
    throw ShapeError(std::to_string(scores.size()) + " scores vs " +
                     std::to_string(grades.size()) + " grades");
  }
  std::vector<int> out;
  out.reserve(grades.size());
  for (std::size_t idx : rank_by_score(scores)) out.push_back(grades[idx]);
  return out;
}

double MetricReport::ndcg(int k) const { return mean_ndcg[cutoff_index(k)]; }
double MetricReport::err(int k) const { return mean_err[cutoff_index(k)]; }

std::vector<double> MetricReport::per_query_ndcg(int k) const {
  const std::size_t c = cutoff_index(k);
  std::vector<double> out;
  for (const auto& q : per_query) out.push_back(q.ndcg[c]);
  return out;
}

std::vector<double> MetricReport::per_query_err(int k) const {
  const std::size_t c = cutoff_index(k);
  std::vector<double> out;
  for (const auto& q : per_query) out.push_back(q.err[c]);
  return out;
}

void MetricReport::recompute_means() {
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    mean_err[c] = mean_of(per_query_err(kCutoffs[c]));
    mean_ndcg[c] = mean_of(per_query_ndcg(kCutoffs[c]));
  }
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("paired_t_test: sample sizes differ (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  if (n < 2) throw Error("paired_t_test: need at least 2 pairs");

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = mean_of(d);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult result;
  result.df = static_cast<int>(n - 1);
  if (sd == 0.0) {
    if (mean == 0.0) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = mean > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
    }
    return result;
  }
  result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(result.df));
  result.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t))),
                        0.0, 1.0);
  return result;
}

MetricReport evaluate_scores(const std::vector<Vector>& scores, const Dataset& dataset) {
  if (scores.size() != dataset.groups.size()) {
    throw ShapeError(std::to_string(scores.size()) + " score vectors for " +
                     std::to_string(dataset.groups.size()) + " groups");
  }
  MetricReport report;
  report.per_query.reserve(dataset.groups.size());
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    const QueryGroup& group = dataset.groups[g];
    const std::vector<int> ranked = ranked_grades(scores[g], group.relevance);
    QueryMetrics q;
    q.qid = group.qid;
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
      q.err[c] = err_at_k(ranked, kCutoffs[c], dataset.k_max);
      q.ndcg[c] = ndcg_at_k(ranked, kCutoffs[c]);
    }
    report.per_query.push_back(std::move(q));
  }
  report.recompute_means();
  return report;
}

MetricReport evaluate(const Scorer& scorer, const Dataset& dataset) {
  std::vector<Vector> scores;
  scores.reserve(dataset.groups.size());
  for (const auto& g : dataset.groups) scores.push_back(scorer(g));
  return evaluate_scores(scores, dataset);
}

MetricReport evaluate(const RsaModel& model, const Dataset& dataset) {
  return evaluate([&](const QueryGroup& g) { return score(model, g.features); }, dataset);
}

namespace {

void write_header(std::ostream& out, std::string_view first) {
  out << first;
  for (int k : kCutoffs) out << "\tERR@" << k << "\tNDCG@" << k;
  out << '\n';
}

}  // namespace

void write_report_table(std::ostream& out, const MetricReport& report, std::string_view system) {
  write_header(out, "system");
  std::ostringstream row;
  row.setf(std::ios::fixed);
  row.precision(4);
  row << system;
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    row << '\t' << report.mean_err[c] << '\t' << report.mean_ndcg[c];
  }
  out << row.str() << '\n';
}

void write_per_query(std::ostream& out, const MetricReport& report) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  write_header(out, "qid");
  for (const auto& q : report.per_query) {
    out << q.qid;
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) out << '\t' << q.err[c] << '\t' << q.ndcg[c];
    out << '\n';
  }
  out.precision(old);
}

MetricReport read_per_query(std::istream& in) {
  MetricReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("qid", 0) == 0) continue;
    std::istringstream fields(line);
    QueryMetrics q;
    fields >> q.qid;
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) fields >> q.err[c] >> q.ndcg[c];
    if (!fields) throw ParseError(line_no, "expected qid followed by 8 metric values");
    report.per_query.push_back(std::move(q));
  }
  report.recompute_means();
  return report;
}

std::vector<SignificanceRow> compare_systems(const MetricReport& a, const MetricReport& b) {
  if (a.query_count() != b.query_count()) {
    throw Error("systems cover different query counts (" + std::to_string(a.query_count()) +
                " vs " + std::to_string(b.query_count()) + ")");
  }
  for (std::size_t i = 0; i < a.query_count(); ++i) {
    if (a.per_query[i].qid != b.per_query[i].qid) {
      throw Error("query order differs at row " + std::to_string(i + 1) + ": " +
                  a.per_query[i].qid + " vs " + b.per_query[i].qid);
    }
  }
  std::vector<SignificanceRow> rows;
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    const int k = kCutoffs[c];
    const auto ea = a.per_query_err(k), eb = b.per_query_err(k);
    rows.push_back({"ERR@" + std::to_string(k), a.mean_err[c], b.mean_err[c], paired_t_test(ea, eb)});
    const auto na = a.per_query_ndcg(k), nb = b.per_query_ndcg(k);
    rows.push_back(
        {"NDCG@" + std::to_string(k), a.mean_ndcg[c], b.mean_ndcg[c], paired_t_test(na, nb)});
  }
  return rows;
}

void write_significance(std::ostream& out, const std::vector<SignificanceRow>& rows) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "metric\tmean_a\tmean_b\tt\tdf\tp\n";
  for (const auto& r : rows) {
    out << r.metric << '\t' << r.mean_a << '\t' << r.mean_b << '\t' << r.test.t << '\t'
        << r.test.df << '\t' << r.test.p << '\n';
  }
  out.precision(old);
}

}  // namespace rsarank
