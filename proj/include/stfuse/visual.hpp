#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "stfuse/errors.hpp"
#include "stfuse/types.hpp"

namespace stfuse {

/// Cosine similarity (a.b)/(|a||b|), clamped to [-1, 1] against rounding.
/// Larger means more similar. Zero-norm vectors are rejected: they indicate
/// corrupted feature files and the formula is undefined for them.
inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw InvalidInputError("cosine_similarity: dimension mismatch (" +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
  }
  if (a.size() == 0) {
    throw InvalidInputError("cosine_similarity: empty vectors");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw InvalidInputError("cosine_similarity: zero-norm vector");
  }
  const double s = a.dot(b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

namespace detail {

/// Stacks dataset features into a matrix with L2-normalized rows.
/// `label` names the dataset in error messages.
inline Eigen::MatrixXd normalized_feature_rows(const Dataset& d, const char* label) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(d.size()), d.feature_dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Eigen::VectorXd& f = d.detections[i].feature;
    if (f.size() != d.feature_dim) {
      throw ValidationError(std::string(label) + " detection " + std::to_string(i) +
                            ": feature length " + std::to_string(f.size()) +
                            " != feature_dim " + std::to_string(d.feature_dim));
    }
    const double n = f.norm();
    if (n == 0.0) {
      throw InvalidInputError(std::string(label) + " detection " + std::to_string(i) +
                              ": zero-norm feature vector");
    }
    m.row(static_cast<Eigen::Index>(i)) = f.transpose() / n;
  }
  return m;
}

}  // namespace detail

/// Batched cosine similarity: entry (i, j) is
/// cosine_similarity(query_i.feature, gallery_j.feature).
inline ScoreMatrix visual_score_matrix(const Dataset& queries, const Dataset& gallery) {
  if (queries.feature_dim != gallery.feature_dim) {
    throw ValidationError("visual_score_matrix: feature_dim mismatch (" +
                          std::to_string(queries.feature_dim) + " vs " +
                          std::to_string(gallery.feature_dim) + ")");
  }
  if (queries.feature_dim == 0) {
    throw InvalidInputError("visual_score_matrix: datasets carry no features");
  }
  const Eigen::MatrixXd q = detail::normalized_feature_rows(queries, "query");
  const Eigen::MatrixXd g = detail::normalized_feature_rows(gallery, "gallery");
  ScoreMatrix out;
  out.mode = FusionMode::VisualOnly;
  out.values = q * g.transpose();
  out.values = out.values.cwiseMax(-1.0).cwiseMin(1.0);
  return out;
}

}  // namespace stfuse
