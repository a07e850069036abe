#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "stfuse/errors.hpp"
#include "stfuse/types.hpp"

namespace stfuse {

/// Per-query ranking with the cross-view junk rule already applied.
/// ordered_gallery holds the non-junk gallery indices sorted by descending
/// score, ties broken by ascending gallery index; junk_mask has one flag per
/// gallery item (true = excluded from scoring for this query).
struct RankedResult {
  int query_index = 0;
  std::vector<int> ordered_gallery;
  std::vector<bool> junk_mask;
};

/// CMC curve, mAP and the per-query APs behind it. Queries left with zero
/// valid positives after junk masking are dropped from both averages;
/// retained_queries records which query indices contributed.
struct EvalReport {
  std::vector<double> cmc;            // cmc[k-1] = top-k accuracy, k = 1..k_max
  double map = 0.0;
  std::vector<double> per_query_ap;   // aligned with retained_queries
  std::vector<int> retained_queries;
};

namespace detail {

inline const Detection& labeled_query(const Dataset& queries, std::size_t i) {
  const Detection& q = queries.detections[i];
  if (!q.person_id) {
    throw ValidationError("rank: query " + std::to_string(i) +
                          " has no person_id; evaluation requires labeled queries");
  }
  return q;
}

// A gallery item is junk for a query if it shares both the identity and the
// camera (cross-view rule) or is a flagged distractor.
inline bool is_junk_for(const Detection& query, const Detection& item) {
  if (item.is_distractor) return true;
  return item.person_id && query.person_id && *item.person_id == *query.person_id &&
         item.camera_id == query.camera_id;
}

inline bool is_positive_for(const Detection& query, const Detection& item) {
  return !item.is_distractor && item.person_id && *item.person_id == *query.person_id &&
         item.camera_id != query.camera_id;
}

}  // namespace detail

/// Sorts every query's non-junk gallery by descending score. Requires labeled
/// queries; gallery labels are needed only to decide junk/positive status.
inline std::vector<RankedResult> rank(const ScoreMatrix& scores, const Dataset& queries,
                                      const Dataset& gallery) {
  const auto rows = static_cast<std::size_t>(scores.values.rows());
  const auto cols = static_cast<std::size_t>(scores.values.cols());
  if (rows != queries.size() || cols != gallery.size()) {
    throw ValidationError("rank: score matrix is " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " but datasets have " +
                          std::to_string(queries.size()) + " queries and " +
                          std::to_string(gallery.size()) + " gallery items");
  }

  std::vector<RankedResult> out;
  out.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const Detection& q = detail::labeled_query(queries, i);
    RankedResult r;
    r.query_index = static_cast<int>(i);
    r.junk_mask.resize(cols, false);
    r.ordered_gallery.reserve(cols);
    for (std::size_t j = 0; j < cols; ++j) {
      if (detail::is_junk_for(q, gallery.detections[j])) {
        r.junk_mask[j] = true;
      } else {
        r.ordered_gallery.push_back(static_cast<int>(j));
      }
    }
    const auto row = scores.values.row(static_cast<Eigen::Index>(i));
    std::stable_sort(r.ordered_gallery.begin(), r.ordered_gallery.end(),
                     [&row](int a, int b) {
                       const double sa = row(a), sb = row(b);
                       if (sa != sb) return sa > sb;
                       return a < b;
                     });
    out.push_back(std::move(r));
  }
  return out;
}

/// Cumulative matching characteristic: cmc[k-1] is the fraction of retained
/// queries whose top-k non-junk list contains at least one cross-camera item
/// of the query identity.
inline std::vector<double> cmc(const std::vector<RankedResult>& ranked, const Dataset& queries,
                               const Dataset& gallery, int k_max) {
  if (k_max < 1) throw InvalidInputError("cmc: k_max must be >= 1");
  std::vector<double> curve(static_cast<std::size_t>(k_max), 0.0);
  std::size_t retained = 0;
  for (const RankedResult& r : ranked) {
    const Detection& q = detail::labeled_query(queries, static_cast<std::size_t>(r.query_index));
    std::size_t first_hit = 0;
    bool any = false;
    for (std::size_t pos = 0; pos < r.ordered_gallery.size(); ++pos) {
      if (detail::is_positive_for(q, gallery.detections[r.ordered_gallery[pos]])) {
        first_hit = pos;
        any = true;
        break;
      }
    }
    if (!any) continue;  // zero valid positives: dropped from the average
    ++retained;
    if (first_hit < static_cast<std::size_t>(k_max)) {
      for (std::size_t k = first_hit; k < static_cast<std::size_t>(k_max); ++k) curve[k] += 1.0;
    }
  }
  if (retained == 0) {
    throw ValidationError("cmc: no query has a valid cross-camera positive");
  }
  for (double& v : curve) v /= static_cast<double>(retained);
  return curve;
}

struct MeanApResult {
  double map = 0.0;
  std::vector<double> per_query_ap;
  std::vector<int> retained_queries;
};

/// Average precision per query: the mean over positives of precision at each
/// hit position (discrete sum, no trapezoidal interpolation), then the mean
/// of those APs over retained queries.
inline MeanApResult mean_ap(const std::vector<RankedResult>& ranked, const Dataset& queries,
                            const Dataset& gallery) {
  MeanApResult res;
  double sum = 0.0;
  for (const RankedResult& r : ranked) {
    const Detection& q = detail::labeled_query(queries, static_cast<std::size_t>(r.query_index));
    std::int64_t hits = 0;
    double ap = 0.0;
    for (std::size_t pos = 0; pos < r.ordered_gallery.size(); ++pos) {
      if (detail::is_positive_for(q, gallery.detections[r.ordered_gallery[pos]])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
      }
    }
    if (hits == 0) continue;
    ap /= static_cast<double>(hits);
    res.per_query_ap.push_back(ap);
    res.retained_queries.push_back(r.query_index);
    sum += ap;
  }
  if (res.per_query_ap.empty()) {
    throw ValidationError("mean_ap: no query has a valid cross-camera positive");
  }
  res.map = sum / static_cast<double>(res.per_query_ap.size());
  return res;
}

/// Ranking plus both metrics in one pass.
inline EvalReport evaluate(const ScoreMatrix& scores, const Dataset& queries,
                           const Dataset& gallery, int k_max) {
  const auto ranked = rank(scores, queries, gallery);
  EvalReport report;
  report.cmc = cmc(ranked, queries, gallery, k_max);
  auto ap = mean_ap(ranked, queries, gallery);
  report.map = ap.map;
  report.per_query_ap = std::move(ap.per_query_ap);
  report.retained_queries = std::move(ap.retained_queries);
  return report;
}

}  // namespace stfuse
