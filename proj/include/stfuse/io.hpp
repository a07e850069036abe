#pragma once

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "stfuse/errors.hpp"
#include "stfuse/types.hpp"

namespace stfuse {

// ---------------------------------------------------------------------------
// Metadata CSV: UTF-8, comma separated, mandatory header
//   record_id,person_id,camera_id,frame,is_distractor
// person_id -1 marks a distractor without an identity label.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::int64_t parse_int_field(const std::string& s, const char* column, int line_no) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("metadata CSV, line " + std::to_string(line_no) + ": column '" + column +
                     "' is not an integer: '" + s + "'");
  }
}

}  // namespace detail

inline constexpr const char* kMetadataHeader = "record_id,person_id,camera_id,frame,is_distractor";

inline Dataset parse_metadata_csv(std::istream& in, DatasetRole role) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("metadata CSV, line 1: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_no;
  if (line != kMetadataHeader) {
    throw ParseError("metadata CSV, line 1: expected header '" + std::string(kMetadataHeader) +
                     "', got '" + line + "'");
  }

  Dataset d;
  d.role = role;
  d.feature_dim = 0;
  int max_camera = -1;
  std::unordered_set<std::string> seen_ids;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 5) {
      throw ParseError("metadata CSV, line " + std::to_string(line_no) + ": expected 5 columns, got " +
                       std::to_string(fields.size()));
    }
    if (!seen_ids.insert(fields[0]).second) {
      throw ParseError("metadata CSV, line " + std::to_string(line_no) + ": duplicate record_id '" +
                       fields[0] + "'");
    }
    Detection det;
    const std::int64_t person = detail::parse_int_field(fields[1], "person_id", line_no);
    det.camera_id = static_cast<int>(detail::parse_int_field(fields[2], "camera_id", line_no));
    det.timestamp = detail::parse_int_field(fields[3], "frame", line_no);
    const std::int64_t distractor = detail::parse_int_field(fields[4], "is_distractor", line_no);
    if (distractor != 0 && distractor != 1) {
      throw ParseError("metadata CSV, line " + std::to_string(line_no) +
                       ": is_distractor must be 0 or 1");
    }
    if (person == -1) {
      det.is_distractor = true;
    } else {
      det.person_id = static_cast<int>(person);
      det.is_distractor = distractor == 1;
    }
    max_camera = std::max(max_camera, det.camera_id);
    d.detections.push_back(std::move(det));
  }
  d.camera_count = std::max(2, max_camera + 1);
  return d;
}

inline Dataset parse_metadata_csv(const std::string& path, DatasetRole role) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metadata CSV: " + path);
  return parse_metadata_csv(in, role);
}

/// Writes the canonical metadata CSV. Record ids are generated as
/// prefix + zero-padded row number, so identical datasets serialize to
/// identical bytes.
inline void write_metadata_csv(const Dataset& d, std::ostream& out,
                               const std::string& record_prefix) {
  out << kMetadataHeader << "\n";
  char idbuf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Detection& det = d.detections[i];
    std::snprintf(idbuf, sizeof(idbuf), "%s%06zu", record_prefix.c_str(), i);
    const int person = det.person_id ? *det.person_id : -1;
    out << idbuf << ',' << person << ',' << det.camera_id << ',' << det.timestamp << ','
        << (det.is_distractor ? 1 : 0) << "\n";
  }
}

inline void write_metadata_csv(const Dataset& d, const std::string& path,
                               const std::string& record_prefix) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open metadata CSV for writing: " + path);
  write_metadata_csv(d, out, record_prefix);
  if (!out) throw Error("failed writing metadata CSV: " + path);
}

// ---------------------------------------------------------------------------
// Market-1501 style filenames: personID_cCsS_frame_seq, e.g. 0002_c1s1_000451_03.
// Camera ids are 1-based in the name and 0-based in memory.

struct MarketFilenameFields {
  int person_id = 0;          // -1 for distractors
  int camera_id = 0;          // zero-based
  std::int64_t frame = 0;
  int sequence_id = 0;        // retained but unused downstream
  bool is_distractor = false;
};

inline MarketFilenameFields parse_market_filename(const std::string& name) {
  static const std::regex pattern(R"(^(-?\d+)_c(\d+)s(\d+)_(\d+)_(\d+)(?:\..+)?$)");
  std::smatch m;
  if (!std::regex_match(name, m, pattern)) {
    throw ParseError("filename '" + name + "' does not match personID_cCsS_frame_seq");
  }
  MarketFilenameFields f;
  f.person_id = std::stoi(m[1].str());
  f.camera_id = std::stoi(m[2].str()) - 1;
  f.sequence_id = std::stoi(m[3].str());
  f.frame = std::stoll(m[4].str());
  f.is_distractor = f.person_id == -1;
  if (f.camera_id < 0) {
    throw ParseError("filename '" + name + "': camera ids are 1-based, got c0");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Feature matrix file: 16-byte little-endian header then a row-major payload.
//   bytes 0-3   magic "FMAT"
//   bytes 4-5   u16 version (1)
//   bytes 6-7   u16 dtype (1 = float32, 2 = float64)
//   bytes 8-11  u32 rows
//   bytes 12-15 u32 dim

enum class FeatureDType : std::uint16_t { Float32 = 1, Float64 = 2 };

struct FeatureMatrix {
  FeatureDType dtype = FeatureDType::Float32;
  Eigen::MatrixXd values;   // widened to double in memory
};

namespace detail {

inline constexpr std::array<char, 4> kFeatureMagic = {'F', 'M', 'A', 'T'};
inline constexpr std::uint16_t kFeatureVersion = 1;

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace detail

inline void write_feature_matrix(const Eigen::MatrixXd& values, FeatureDType dtype,
                                 std::ostream& out) {
  std::string header;
  header.append(detail::kFeatureMagic.data(), detail::kFeatureMagic.size());
  detail::put_le<std::uint16_t>(header, detail::kFeatureVersion);
  detail::put_le<std::uint16_t>(header, static_cast<std::uint16_t>(dtype));
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(values.rows()));
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(values.cols()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::string payload;
  const std::size_t elem = dtype == FeatureDType::Float32 ? 4 : 8;
  payload.reserve(static_cast<std::size_t>(values.size()) * elem);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (dtype == FeatureDType::Float32) {
        detail::put_le<std::uint32_t>(payload,
                                      std::bit_cast<std::uint32_t>(static_cast<float>(values(r, c))));
      } else {
        detail::put_le<std::uint64_t>(payload, std::bit_cast<std::uint64_t>(values(r, c)));
      }
    }
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

inline void write_feature_matrix(const Eigen::MatrixXd& values, FeatureDType dtype,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open feature file for writing: " + path);
  write_feature_matrix(values, dtype, out);
  if (!out) throw Error("failed writing feature file: " + path);
}

inline FeatureMatrix read_feature_matrix(std::istream& in) {
  std::array<unsigned char, 16> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) {
    throw ParseError("feature file: truncated header at byte offset " +
                     std::to_string(in.gcount()));
  }
  if (std::memcmp(header.data(), detail::kFeatureMagic.data(), 4) != 0) {
    throw ParseError("feature file: bad magic at byte offset 0");
  }
  const auto version = detail::get_le<std::uint16_t>(header.data() + 4);
  if (version != detail::kFeatureVersion) {
    throw ParseError("feature file: unsupported version " + std::to_string(version));
  }
  const auto dtype_code = detail::get_le<std::uint16_t>(header.data() + 6);
  if (dtype_code != 1 && dtype_code != 2) {
    throw ParseError("feature file: unknown dtype code " + std::to_string(dtype_code));
  }
  const auto rows = detail::get_le<std::uint32_t>(header.data() + 8);
  const auto dim = detail::get_le<std::uint32_t>(header.data() + 12);

  FeatureMatrix fm;
  fm.dtype = static_cast<FeatureDType>(dtype_code);
  const std::size_t elem = fm.dtype == FeatureDType::Float32 ? 4 : 8;
  const std::size_t expected = static_cast<std::size_t>(rows) * dim * elem;
  std::string payload(expected, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(expected));
  if (static_cast<std::size_t>(in.gcount()) != expected) {
    throw ParseError("feature file: payload is " + std::to_string(in.gcount()) +
                     " bytes, header declares " + std::to_string(expected) +
                     " (truncated at byte offset " + std::to_string(16 + in.gcount()) + ")");
  }
  char probe;
  if (in.read(&probe, 1)) {
    throw ParseError("feature file: trailing bytes after declared payload (byte offset " +
                     std::to_string(16 + expected) + ")");
  }

  fm.values.resize(rows, dim);
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      if (fm.dtype == FeatureDType::Float32) {
        fm.values(r, c) = std::bit_cast<float>(detail::get_le<std::uint32_t>(p));
        p += 4;
      } else {
        fm.values(r, c) = std::bit_cast<double>(detail::get_le<std::uint64_t>(p));
        p += 8;
      }
    }
  }
  return fm;
}

inline FeatureMatrix read_feature_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path);
  return read_feature_matrix(in);
}

inline FeatureMatrix read_feature_matrix(std::istream& in, FeatureDType expected) {
  FeatureMatrix fm = read_feature_matrix(in);
  if (fm.dtype != expected) {
    throw ParseError("feature file: dtype is " +
                     std::string(fm.dtype == FeatureDType::Float32 ? "float32" : "float64") +
                     ", expected " +
                     std::string(expected == FeatureDType::Float32 ? "float32" : "float64"));
  }
  return fm;
}

/// Positional join of a metadata-only dataset with a feature matrix:
/// row i of the matrix becomes the feature of detection i.
inline Dataset with_features(Dataset meta, const FeatureMatrix& features) {
  if (static_cast<std::size_t>(features.values.rows()) != meta.size()) {
    throw ValidationError("feature join: matrix has " + std::to_string(features.values.rows()) +
                          " rows but metadata has " + std::to_string(meta.size()) + " records");
  }
  meta.feature_dim = static_cast<int>(features.values.cols());
  for (std::size_t i = 0; i < meta.size(); ++i) {
    meta.detections[i].feature = features.values.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return meta;
}

}  // namespace stfuse
