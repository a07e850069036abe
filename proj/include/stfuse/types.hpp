#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace stfuse {

/// One gallery/query/train record: a feature vector plus the spatial-temporal
/// side information (camera id, frame timestamp) and an optional identity
/// label. Instances are treated as immutable after dataset construction.
struct Detection {
  Eigen::VectorXd feature;            // empty when metadata-only
  int camera_id = 0;                  // index in [0, camera_count)
  std::int64_t timestamp = 0;         // frame number, >= 0
  std::optional<int> person_id;       // absent for unlabeled query-time use
  bool is_distractor = false;
};

enum class DatasetRole { Train, Query, Gallery };

struct Dataset {
  std::vector<Detection> detections;
  int camera_count = 2;
  int feature_dim = 0;                // 0 = features absent (metadata-only)
  DatasetRole role = DatasetRole::Gallery;

  std::size_t size() const { return detections.size(); }
};

/// Ordered camera pair. `from` is the camera of the temporally earlier
/// detection of a pair, `to` the later one; (a,b) and (b,a) are distinct.
struct CameraPairKey {
  int from_camera = 0;
  int to_camera = 0;

  auto operator<=>(const CameraPairKey&) const = default;
};

enum class FusionMode {
  VisualOnly,
  StOnly,
  NaiveProduct,
  JointLogisticSmoothing,
};

inline const char* fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::VisualOnly: return "visual_only";
    case FusionMode::StOnly: return "st_only";
    case FusionMode::NaiveProduct: return "naive_product";
    case FusionMode::JointLogisticSmoothing: return "joint_ls";
  }
  return "unknown";
}

/// Dense query x gallery score matrix. Larger is always better; the
/// evaluation module sorts descending.
struct ScoreMatrix {
  Eigen::MatrixXd values;             // rows = queries, cols = gallery
  FusionMode mode = FusionMode::VisualOnly;
};

enum class ViolationKind {
  FeatureDimMismatch,
  CameraOutOfRange,
  NegativeTimestamp,
  CameraCountTooSmall,
};

struct Violation {
  ViolationKind kind;
  std::size_t detection_index;        // npos for dataset-level violations
  std::string message;

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

/// Checks every Detection invariant and the dataset-level camera count.
/// Returns diagnostics instead of throwing; an empty list means valid.
inline std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> out;
  if (d.camera_count < 2) {
    out.push_back({ViolationKind::CameraCountTooSmall, Violation::npos,
                   "camera_count is " + std::to_string(d.camera_count) +
                       "; cross-camera retrieval requires at least 2"});
  }
  for (std::size_t i = 0; i < d.detections.size(); ++i) {
    const Detection& det = d.detections[i];
    if (det.feature.size() != d.feature_dim) {
      out.push_back({ViolationKind::FeatureDimMismatch, i,
                     "detection " + std::to_string(i) + " has feature length " +
                         std::to_string(det.feature.size()) + ", expected " +
                         std::to_string(d.feature_dim)});
    }
    if (det.camera_id < 0 || det.camera_id >= d.camera_count) {
      out.push_back({ViolationKind::CameraOutOfRange, i,
                     "detection " + std::to_string(i) + " has camera_id " +
                         std::to_string(det.camera_id) + ", valid range is [0, " +
                         std::to_string(d.camera_count) + ")"});
    }
    if (det.timestamp < 0) {
      out.push_back({ViolationKind::NegativeTimestamp, i,
                     "detection " + std::to_string(i) + " has negative timestamp " +
                         std::to_string(det.timestamp)});
    }
  }
  return out;
}

}  // namespace stfuse
