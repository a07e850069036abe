#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stfuse/errors.hpp"
#include "stfuse/types.hpp"

namespace stfuse {

/// Parameters of the transition-time estimator. `kernel_sigma` and the
/// truncation radius are expressed in bin units, not frames.
struct STConfig {
  int bin_width_frames = 100;       // delta-t, histogram bin width in frames
  double kernel_sigma = 50.0;       // Gaussian kernel sigma, in bins
  double truncation_sigmas = 3.0;   // kernel support cut at this many sigmas
  int max_bins = 3000;              // hard cap on histogram length

  void validate() const {
    if (bin_width_frames < 1) throw InvalidInputError("STConfig: bin_width_frames must be >= 1");
    if (!(kernel_sigma > 0.0)) throw InvalidInputError("STConfig: kernel_sigma must be > 0");
    if (!(truncation_sigmas > 0.0)) throw InvalidInputError("STConfig: truncation_sigmas must be > 0");
    if (max_bins < 1) throw InvalidInputError("STConfig: max_bins must be >= 1");
  }
};

using RawHistogram = std::map<CameraPairKey, std::vector<std::int64_t>>;

/// Smoothed transition-time distribution per ordered camera pair. Pairs never
/// observed in training are simply absent; lookups on them return 0.
struct STModel {
  STConfig config;
  int camera_count = 2;
  std::map<CameraPairKey, std::vector<double>> pmf;
  std::map<CameraPairKey, std::int64_t> pair_counts;
};

/// Gaussian kernel (1 / (sqrt(2*pi) * sigma)) * exp(-x^2 / (2 * sigma^2)).
inline double gaussian_kernel(double x, double sigma) {
  static constexpr double kSqrt2Pi = 2.5066282746310002;
  return std::exp(-(x * x) / (2.0 * sigma * sigma)) / (kSqrt2Pi * sigma);
}

/// 1-based histogram bin of a time difference: k = ceil(delta / bin_width),
/// with delta = 0 mapping to bin 1 and k clamped to max_bins. Bin k covers
/// the interval ((k-1)*bin_width, k*bin_width].
inline int bin_index(std::int64_t delta_frames, const STConfig& cfg) {
  if (delta_frames < 0) throw InvalidInputError("bin_index: negative time difference");
  if (delta_frames == 0) return 1;
  const std::int64_t w = cfg.bin_width_frames;
  const std::int64_t k = (delta_frames + w - 1) / w;
  return static_cast<int>(std::min<std::int64_t>(k, cfg.max_bins));
}

namespace detail {

inline void require_valid(const Dataset& d, const char* label) {
  const auto violations = validate_dataset(d);
  if (!violations.empty()) {
    throw ValidationError(std::string(label) + " dataset invalid: " + violations.front().message +
                          (violations.size() > 1
                               ? " (+" + std::to_string(violations.size() - 1) + " more)"
                               : ""));
  }
}

// Time-orders a pair of detections; equal timestamps fall back to camera id
// so the result does not depend on input order.
inline std::pair<const Detection*, const Detection*> time_ordered(const Detection& a,
                                                                  const Detection& b) {
  if (a.timestamp < b.timestamp) return {&a, &b};
  if (b.timestamp < a.timestamp) return {&b, &a};
  return a.camera_id <= b.camera_id ? std::make_pair(&a, &b) : std::make_pair(&b, &a);
}

}  // namespace detail

/// Counts positive (same identity) cross-camera pairs into per-pair histograms.
/// Each unordered pair is ordered by timestamp; the earlier detection's camera
/// is the source. Same-camera pairs and distractors contribute nothing.
inline RawHistogram fit_histogram(const Dataset& train, const STConfig& cfg) {
  cfg.validate();
  detail::require_valid(train, "train");

  std::map<int, std::vector<std::size_t>> by_person;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Detection& det = train.detections[i];
    if (det.is_distractor) continue;
    if (!det.person_id) {
      throw ValidationError("fit_histogram: detection " + std::to_string(i) +
                            " has no person_id; transition fitting needs labeled data");
    }
    by_person[*det.person_id].push_back(i);
  }

  RawHistogram hist;
  for (const auto& [person, members] : by_person) {
    for (std::size_t a = 0; a + 1 < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const Detection& da = train.detections[members[a]];
        const Detection& db = train.detections[members[b]];
        if (da.camera_id == db.camera_id) continue;
        const auto [first, second] = detail::time_ordered(da, db);
        const int k = bin_index(second->timestamp - first->timestamp, cfg);
        auto& counts = hist[{first->camera_id, second->camera_id}];
        if (counts.size() < static_cast<std::size_t>(k)) counts.resize(k, 0);
        ++counts[k - 1];
      }
    }
  }
  return hist;
}

/// Histogram-Parzen smoothing: normalizes the counts, convolves with a
/// Gaussian kernel evaluated at integer bin offsets and truncated at
/// `truncation_sigmas * kernel_sigma`, then renormalizes to a pmf. The window
/// is clipped at the histogram boundaries; no reflection or padding.
inline std::vector<double> smooth(const std::vector<double>& raw, const STConfig& cfg) {
  cfg.validate();
  if (raw.empty()) throw InvalidInputError("smooth: empty histogram");
  double total = 0.0;
  for (double v : raw) {
    if (v < 0.0) throw InvalidInputError("smooth: negative count");
    total += v;
  }
  if (total <= 0.0) throw InvalidInputError("smooth: histogram has zero total count");

  const std::size_t k_bins = raw.size();
  std::vector<double> phat(k_bins);
  for (std::size_t i = 0; i < k_bins; ++i) phat[i] = raw[i] / total;

  // |l - k| is an integer, so the real-valued cutoff reduces to a radius.
  const double cutoff = cfg.truncation_sigmas * cfg.kernel_sigma;
  const std::size_t radius =
      cutoff >= static_cast<double>(k_bins) ? k_bins : static_cast<std::size_t>(cutoff);

  std::vector<double> out(k_bins, 0.0);
  double z = 0.0;
  for (std::size_t k = 0; k < k_bins; ++k) {
    const std::size_t lo = k >= radius ? k - radius : 0;
    const std::size_t hi = std::min(k_bins - 1, k + radius);
    double acc = 0.0;
    for (std::size_t l = lo; l <= hi; ++l) {
      acc += phat[l] * gaussian_kernel(static_cast<double>(l) - static_cast<double>(k),
                                       cfg.kernel_sigma);
    }
    out[k] = acc;
    z += acc;
  }
  for (double& v : out) v /= z;
  return out;
}

inline std::vector<double> smooth(const std::vector<std::int64_t>& raw, const STConfig& cfg) {
  std::vector<double> as_double(raw.begin(), raw.end());
  return smooth(as_double, cfg);
}

/// Fits the full spatial-temporal model: histogram then Parzen smoothing for
/// every camera pair with at least one positive pair.
inline STModel fit(const Dataset& train, const STConfig& cfg) {
  STModel model;
  model.config = cfg;
  model.camera_count = train.camera_count;
  for (const auto& [key, counts] : fit_histogram(train, cfg)) {
    std::int64_t total = 0;
    for (std::int64_t c : counts) total += c;
    model.pair_counts[key] = total;
    model.pmf[key] = smooth(counts, cfg);
  }
  return model;
}

/// p(y=1 | bin(delta), from_cam -> to_cam). Returns 0 for camera pairs never
/// observed in training and for time differences beyond the stored support;
/// logistic smoothing downstream lifts those zeros.
inline double query_probability(const STModel& model, int from_cam, int to_cam,
                                std::int64_t delta_frames) {
  if (from_cam < 0 || from_cam >= model.camera_count || to_cam < 0 ||
      to_cam >= model.camera_count) {
    throw InvalidInputError("query_probability: camera index out of range [0, " +
                            std::to_string(model.camera_count) + ")");
  }
  const auto it = model.pmf.find({from_cam, to_cam});
  if (it == model.pmf.end()) return 0.0;
  const int k = bin_index(delta_frames, model.config);
  if (static_cast<std::size_t>(k) > it->second.size()) return 0.0;
  return it->second[k - 1];
}

// ---------------------------------------------------------------------------
// Model serialization: a line-oriented text format, human-diffable.
// Field names are documented in the README; the first line is the mandatory
// version tag. Doubles are printed with 17 significant digits so a round trip
// is bit-exact.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Returns false at EOF; skips nothing, every line counts.
  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no_;
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("model file, line " + std::to_string(line_no_) + ": " + what);
  }

  int line_no() const { return line_no_; }

 private:
  std::istream& in_;
  int line_no_ = 0;
};

}  // namespace detail

inline constexpr const char* kModelFormatTag = "stfuse_st_model_v1";

inline void save_model(const STModel& model, std::ostream& out) {
  out << kModelFormatTag << "\n";
  out << "bin_width_frames " << model.config.bin_width_frames << "\n";
  out << "kernel_sigma " << detail::format_double(model.config.kernel_sigma) << "\n";
  out << "truncation_sigmas " << detail::format_double(model.config.truncation_sigmas) << "\n";
  out << "max_bins " << model.config.max_bins << "\n";
  out << "camera_count " << model.camera_count << "\n";
  out << "pairs " << model.pmf.size() << "\n";
  for (const auto& [key, pmf] : model.pmf) {
    const auto counts_it = model.pair_counts.find(key);
    const std::int64_t count = counts_it == model.pair_counts.end() ? 0 : counts_it->second;
    out << "pair " << key.from_camera << " " << key.to_camera << " " << count << " "
        << pmf.size() << "\n";
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      if (i) out << ' ';
      out << detail::format_double(pmf[i]);
    }
    out << "\n";
  }
}

inline void save_model(const STModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open model file for writing: " + path);
  save_model(model, out);
  if (!out) throw Error("failed writing model file: " + path);
}

inline STModel load_model(std::istream& in) {
  detail::LineReader reader(in);
  std::string line;

  if (!reader.next(line)) reader.fail("empty file, expected version tag");
  if (line != kModelFormatTag) {
    reader.fail("unrecognized version tag '" + line + "', expected '" + kModelFormatTag + "'");
  }

  STModel model;
  auto read_field = [&](const char* name) -> std::string {
    if (!reader.next(line)) reader.fail(std::string("unexpected end of file, expected '") + name + "'");
    std::istringstream ss(line);
    std::string key, value, extra;
    if (!(ss >> key >> value) || key != name || (ss >> extra)) {
      reader.fail(std::string("expected '") + name + " <value>', got '" + line + "'");
    }
    return value;
  };
  auto to_int = [&](const std::string& s) -> long long {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      reader.fail("not an integer: '" + s + "'");
    }
  };
  auto to_double = [&](const std::string& s) -> double {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      reader.fail("not a number: '" + s + "'");
    }
  };

  model.config.bin_width_frames = static_cast<int>(to_int(read_field("bin_width_frames")));
  model.config.kernel_sigma = to_double(read_field("kernel_sigma"));
  model.config.truncation_sigmas = to_double(read_field("truncation_sigmas"));
  model.config.max_bins = static_cast<int>(to_int(read_field("max_bins")));
  model.camera_count = static_cast<int>(to_int(read_field("camera_count")));
  try {
    model.config.validate();
  } catch (const InvalidInputError& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
  if (model.camera_count < 2) throw ValidationError("model file: camera_count must be >= 2");

  const long long pairs = to_int(read_field("pairs"));
  if (pairs < 0) reader.fail("negative pair count");

  for (long long p = 0; p < pairs; ++p) {
    if (!reader.next(line)) reader.fail("unexpected end of file, expected 'pair' header");
    std::istringstream ss(line);
    std::string tag;
    long long from = 0, to = 0, count = 0, nbins = 0;
    if (!(ss >> tag >> from >> to >> count >> nbins) || tag != "pair") {
      reader.fail("expected 'pair <from> <to> <count> <bins>', got '" + line + "'");
    }
    if (from < 0 || from >= model.camera_count || to < 0 || to >= model.camera_count) {
      throw ValidationError("model file, line " + std::to_string(reader.line_no()) +
                            ": camera index out of range");
    }
    if (count <= 0) {
      throw ValidationError("model file, line " + std::to_string(reader.line_no()) +
                            ": stored pairs must have a positive count");
    }
    if (nbins < 1 || nbins > model.config.max_bins) {
      throw ValidationError("model file, line " + std::to_string(reader.line_no()) +
                            ": bin count " + std::to_string(nbins) + " outside [1, max_bins]");
    }

    if (!reader.next(line)) reader.fail("unexpected end of file, expected pmf values");
    std::istringstream vs(line);
    std::vector<double> pmf;
    pmf.reserve(static_cast<std::size_t>(nbins));
    std::string token;
    while (vs >> token) pmf.push_back(to_double(token));
    if (pmf.size() != static_cast<std::size_t>(nbins)) {
      reader.fail("expected " + std::to_string(nbins) + " pmf values, got " +
                  std::to_string(pmf.size()));
    }
    double sum = 0.0;
    for (double v : pmf) {
      if (v < 0.0) {
        throw ValidationError("model file, line " + std::to_string(reader.line_no()) +
                              ": negative pmf entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("model file, line " + std::to_string(reader.line_no()) +
                            ": pmf sums to " + detail::format_double(sum) + ", expected 1");
    }

    const CameraPairKey key{static_cast<int>(from), static_cast<int>(to)};
    if (model.pmf.count(key)) {
      throw ValidationError("model file, line " + std::to_string(reader.line_no()) +
                            ": duplicate camera pair");
    }
    model.pmf[key] = std::move(pmf);
    model.pair_counts[key] = count;
  }
  return model;
}

inline STModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace stfuse
