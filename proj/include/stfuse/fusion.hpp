#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "stfuse/errors.hpp"
#include "stfuse/parallel.hpp"
#include "stfuse/st_model.hpp"
#include "stfuse/types.hpp"
#include "stfuse/visual.hpp"

namespace stfuse {

/// Coefficients of the logistic-smoothed joint metric. lambda0/gamma0 shape
/// the visual-similarity factor, lambda1/gamma1 the spatial-temporal factor.
struct FusionConfig {
  double lambda0 = 1.0;
  double gamma0 = 5.0;
  double lambda1 = 2.0;
  double gamma1 = 5.0;
  FusionMode mode = FusionMode::JointLogisticSmoothing;

  void validate() const {
    if (!(lambda0 > 0.0) || !(gamma0 > 0.0) || !(lambda1 > 0.0) || !(gamma1 > 0.0)) {
      throw InvalidInputError("FusionConfig: all coefficients must be > 0");
    }
  }
};

/// 1 / (1 + lambda * exp(-gamma * x)). Strictly increasing in x, range (0, 1).
inline double logistic(double x, double lambda, double gamma) {
  if (!(lambda > 0.0) || !(gamma > 0.0)) {
    throw InvalidInputError("logistic: lambda and gamma must be > 0");
  }
  return 1.0 / (1.0 + lambda * std::exp(-gamma * x));
}

namespace detail {

constexpr double kRangeSlack = 1e-9;

inline double checked_similarity(double s) {
  if (s < -1.0 - kRangeSlack || s > 1.0 + kRangeSlack) {
    throw InvalidInputError("joint_score: similarity " + std::to_string(s) +
                            " outside [-1, 1]");
  }
  return std::clamp(s, -1.0, 1.0);
}

inline double checked_probability(double p) {
  if (p < -kRangeSlack || p > 1.0 + kRangeSlack) {
    throw InvalidInputError("joint_score: probability " + std::to_string(p) +
                            " outside [0, 1]");
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace detail

/// Fuses one visual similarity with one transition probability under the
/// configured mode. The naive baseline and the visual-only mode rescale s to
/// [0, 1] via (s + 1) / 2 so every mode yields a probability-like score.
inline double joint_score(double s, double p_st, const FusionConfig& cfg) {
  cfg.validate();
  s = detail::checked_similarity(s);
  p_st = detail::checked_probability(p_st);
  switch (cfg.mode) {
    case FusionMode::VisualOnly:
      return (s + 1.0) / 2.0;
    case FusionMode::StOnly:
      return p_st;
    case FusionMode::NaiveProduct:
      return ((s + 1.0) / 2.0) * p_st;
    case FusionMode::JointLogisticSmoothing:
      return logistic(s, cfg.lambda0, cfg.gamma0) * logistic(p_st, cfg.lambda1, cfg.gamma1);
  }
  throw InvalidInputError("joint_score: unknown fusion mode");
}

/// Transition probabilities for every query/gallery pairing. Entry (i, j) is
/// query_probability for the time-ordered camera pair of the two detections
/// and their absolute frame difference. Rows are computed independently, so
/// the worker count never changes the result.
inline Eigen::MatrixXd st_probability_matrix(const Dataset& queries, const Dataset& gallery,
                                             const STModel& st, int workers = 1) {
  for (const Dataset* d : {&queries, &gallery}) {
    for (std::size_t i = 0; i < d->size(); ++i) {
      if (d->detections[i].camera_id >= st.camera_count || d->detections[i].camera_id < 0) {
        throw ValidationError("st_probability_matrix: detection " + std::to_string(i) +
                              " uses camera " + std::to_string(d->detections[i].camera_id) +
                              " not covered by the model (camera_count " +
                              std::to_string(st.camera_count) + ")");
      }
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(queries.size()),
                      static_cast<Eigen::Index>(gallery.size()));
  detail::parallel_for(queries.size(), workers, [&](std::size_t i) {
    const Detection& q = queries.detections[i];
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      const auto [first, second] = detail::time_ordered(q, gallery.detections[j]);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          query_probability(st, first->camera_id, second->camera_id,
                            second->timestamp - first->timestamp);
    }
  });
  return out;
}

/// Elementwise fusion of precomputed visual similarities and transition
/// probabilities. Lets callers score several modes or coefficient settings
/// without recomputing either ingredient.
inline ScoreMatrix fuse_score_parts(const Eigen::MatrixXd& visual, const Eigen::MatrixXd& st_prob,
                                    const FusionConfig& cfg, int workers = 1) {
  cfg.validate();
  const bool needs_visual = cfg.mode != FusionMode::StOnly;
  const bool needs_st = cfg.mode != FusionMode::VisualOnly;
  const Eigen::Index rows = needs_visual ? visual.rows() : st_prob.rows();
  const Eigen::Index cols = needs_visual ? visual.cols() : st_prob.cols();
  if (needs_visual && needs_st &&
      (visual.rows() != st_prob.rows() || visual.cols() != st_prob.cols())) {
    throw ValidationError("fuse_score_parts: visual and transition matrices differ in shape");
  }
  ScoreMatrix out;
  out.mode = cfg.mode;
  out.values.resize(rows, cols);
  detail::parallel_for(static_cast<std::size_t>(rows), workers, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double s = needs_visual ? visual(r, j) : 0.0;
      const double p = needs_st ? st_prob(r, j) : 0.0;
      out.values(r, j) = joint_score(s, p, cfg);
    }
  });
  return out;
}

/// Batched fusion from datasets. StOnly runs without features; VisualOnly
/// ignores the model entirely.
inline ScoreMatrix fused_score_matrix(const Dataset& queries, const Dataset& gallery,
                                      const STModel& st, const FusionConfig& cfg,
                                      int workers = 1) {
  cfg.validate();
  detail::require_valid(queries, "query");
  detail::require_valid(gallery, "gallery");

  Eigen::MatrixXd visual;
  Eigen::MatrixXd st_prob;
  if (cfg.mode != FusionMode::StOnly) {
    visual = visual_score_matrix(queries, gallery).values;
  }
  if (cfg.mode != FusionMode::VisualOnly) {
    st_prob = st_probability_matrix(queries, gallery, st, workers);
  }
  return fuse_score_parts(visual, st_prob, cfg, workers);
}

}  // namespace stfuse
