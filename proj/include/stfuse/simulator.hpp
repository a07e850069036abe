#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stfuse/errors.hpp"
#include "stfuse/types.hpp"

namespace stfuse {

struct TransitComponent {
  double mean_frames = 0.0;
  double std_frames = 1.0;
  double weight = 1.0;
};

using TransitMixture = std::vector<TransitComponent>;

/// Synthetic camera-network generator config. Identities walk the topology
/// graph; transit times between consecutive sightings are drawn from the
/// per-edge Gaussian mixtures, so the planted transition distributions are
/// known exactly. identity_signal interpolates feature centroids between one
/// shared vector (0, indistinguishable) and per-identity directions (1,
/// perfectly separable).
struct SimConfig {
  int camera_count = 2;
  int identities = 200;
  int sightings_min = 4;
  int sightings_max = 8;
  int feature_dim = 32;
  double identity_signal = 0.5;
  double noise_std = 0.5;
  std::int64_t start_window_frames = 200000;
  std::uint64_t seed = 1;
  std::map<CameraPairKey, TransitMixture> topology;

  void validate() const {
    if (camera_count < 2) throw InvalidInputError("SimConfig: camera_count must be >= 2");
    if (identities < 1) throw InvalidInputError("SimConfig: identities must be >= 1");
    if (sightings_min < 1 || sightings_max < sightings_min) {
      throw InvalidInputError("SimConfig: need 1 <= sightings_min <= sightings_max");
    }
    if (feature_dim < 1) throw InvalidInputError("SimConfig: feature_dim must be >= 1");
    if (identity_signal < 0.0 || identity_signal > 1.0) {
      throw InvalidInputError("SimConfig: identity_signal must be in [0, 1]");
    }
    if (noise_std < 0.0) throw InvalidInputError("SimConfig: noise_std must be >= 0");
    if (start_window_frames < 1) throw InvalidInputError("SimConfig: start_window_frames must be >= 1");
    if (topology.empty()) throw InvalidInputError("SimConfig: topology must have at least one edge");
    for (const auto& [key, mixture] : topology) {
      if (key.from_camera < 0 || key.from_camera >= camera_count || key.to_camera < 0 ||
          key.to_camera >= camera_count) {
        throw InvalidInputError("SimConfig: topology edge uses camera outside [0, camera_count)");
      }
      if (key.from_camera == key.to_camera) {
        throw InvalidInputError("SimConfig: topology edges must connect distinct cameras");
      }
      if (mixture.empty()) throw InvalidInputError("SimConfig: topology edge with empty mixture");
      double wsum = 0.0;
      for (const TransitComponent& c : mixture) {
        if (!(c.std_frames > 0.0)) throw InvalidInputError("SimConfig: mixture std must be > 0");
        if (!(c.weight > 0.0)) throw InvalidInputError("SimConfig: mixture weights must be > 0");
        wsum += c.weight;
      }
      if (std::abs(wsum - 1.0) > 1e-9) {
        throw InvalidInputError("SimConfig: mixture weights must sum to 1");
      }
    }
  }
};

struct SimOutput {
  Dataset train;
  Dataset query;
  Dataset gallery;
  std::map<CameraPairKey, TransitMixture> ground_truth;
};

namespace detail {

// All sampling is hand-rolled on top of mt19937_64 so outputs are identical
// across platforms and standard library versions.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive bounds
    const auto span = static_cast<double>(hi - lo + 1);
    const auto off = static_cast<std::int64_t>(uniform01() * span);
    return lo + std::min(off, hi - lo);
  }

  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    constexpr double two_pi = 6.283185307179586;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  std::size_t categorical(const std::vector<double>& weights) {
    const double u = uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      cum += weights[i];
      if (u < cum) return i;
    }
    return weights.size() - 1;
  }

  Eigen::VectorXd unit_vector(int dim) {
    Eigen::VectorXd v(dim);
    for (;;) {
      for (int i = 0; i < dim; ++i) v[i] = normal();
      const double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

  Eigen::VectorXd noise_vector(int dim, double std) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = std * normal();
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace detail

/// Integrates a transit-time mixture over histogram bins k = 1..k_bins
/// (bin k covers ((k-1)*bin_width, k*bin_width]) and renormalizes over that
/// support. This is the reference the fitted model is compared against.
inline std::vector<double> binned_mixture_pmf(const TransitMixture& mixture,
                                              int bin_width_frames, int k_bins) {
  if (bin_width_frames < 1 || k_bins < 1) {
    throw InvalidInputError("binned_mixture_pmf: bin_width and k_bins must be >= 1");
  }
  auto cdf = [&](double x) {
    double acc = 0.0;
    for (const TransitComponent& c : mixture) {
      acc += c.weight * 0.5 * (1.0 + std::erf((x - c.mean_frames) / (c.std_frames * std::sqrt(2.0))));
    }
    return acc;
  };
  std::vector<double> pmf(static_cast<std::size_t>(k_bins));
  double total = 0.0;
  for (int k = 1; k <= k_bins; ++k) {
    const double lo = static_cast<double>(bin_width_frames) * (k - 1);
    const double hi = static_cast<double>(bin_width_frames) * k;
    pmf[static_cast<std::size_t>(k - 1)] = cdf(hi) - cdf(lo);
    total += pmf[static_cast<std::size_t>(k - 1)];
  }
  if (total <= 0.0) throw InvalidInputError("binned_mixture_pmf: mixture has no mass in support");
  for (double& v : pmf) v /= total;
  return pmf;
}

/// Generates train/query/gallery datasets with a known transition structure.
/// Identities are split disjointly: the first ceil(N/2) go to train, the rest
/// to the test side, where per identity and camera the earliest sighting
/// becomes a query and the remainder gallery. Deterministic given the seed.
inline SimOutput simulate(const SimConfig& cfg) {
  cfg.validate();
  detail::SimRng rng(cfg.seed);

  // Cameras a walk can continue from, and their out-neighbors.
  std::map<int, std::vector<CameraPairKey>> out_edges;
  for (const auto& [key, mixture] : cfg.topology) out_edges[key.from_camera].push_back(key);
  std::vector<int> start_cameras;
  for (const auto& [cam, edges] : out_edges) start_cameras.push_back(cam);

  const Eigen::VectorXd shared_direction = rng.unit_vector(cfg.feature_dim);

  struct Sighting {
    int camera_id;
    std::int64_t timestamp;
    Eigen::VectorXd feature;
  };

  SimOutput out;
  out.ground_truth = cfg.topology;
  out.train.camera_count = cfg.camera_count;
  out.train.feature_dim = cfg.feature_dim;
  out.train.role = DatasetRole::Train;
  out.query = out.train;
  out.query.role = DatasetRole::Query;
  out.gallery = out.train;
  out.gallery.role = DatasetRole::Gallery;

  const int train_identities = (cfg.identities + 1) / 2;

  for (int person = 0; person < cfg.identities; ++person) {
    Eigen::VectorXd centroid;
    for (;;) {
      const Eigen::VectorXd own = rng.unit_vector(cfg.feature_dim);
      centroid = (1.0 - cfg.identity_signal) * shared_direction + cfg.identity_signal * own;
      const double n = centroid.norm();
      if (n > 1e-9) {
        centroid /= n;
        break;
      }
    }

    const auto sightings_wanted = rng.uniform_int(cfg.sightings_min, cfg.sightings_max);
    int camera = start_cameras[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(start_cameras.size()) - 1))];
    std::int64_t t = rng.uniform_int(0, cfg.start_window_frames - 1);

    std::vector<Sighting> walk;
    walk.push_back({camera, t, centroid + rng.noise_vector(cfg.feature_dim, cfg.noise_std)});
    for (std::int64_t s = 1; s < sightings_wanted; ++s) {
      const auto edges_it = out_edges.find(camera);
      if (edges_it == out_edges.end()) break;  // dead end, walk stops early
      const auto& edges = edges_it->second;
      const CameraPairKey edge = edges[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(edges.size()) - 1))];
      const TransitMixture& mixture = cfg.topology.at(edge);
      std::vector<double> weights;
      weights.reserve(mixture.size());
      for (const TransitComponent& c : mixture) weights.push_back(c.weight);
      const TransitComponent& comp = mixture[rng.categorical(weights)];
      const auto delta = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(std::llround(rng.normal(comp.mean_frames, comp.std_frames))));
      camera = edge.to_camera;
      t += delta;
      walk.push_back({camera, t, centroid + rng.noise_vector(cfg.feature_dim, cfg.noise_std)});
    }

    auto make_detection = [&](const Sighting& s) {
      Detection d;
      d.feature = s.feature;
      d.camera_id = s.camera_id;
      d.timestamp = s.timestamp;
      d.person_id = person;
      return d;
    };

    if (person < train_identities) {
      for (const Sighting& s : walk) out.train.detections.push_back(make_detection(s));
    } else {
      std::map<int, bool> camera_seen;
      for (const Sighting& s : walk) {
        if (!camera_seen[s.camera_id]) {
          camera_seen[s.camera_id] = true;
          out.query.detections.push_back(make_detection(s));
        } else {
          out.gallery.detections.push_back(make_detection(s));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Declarative config file (JSON).

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  try {
    cfg.camera_count = j.at("camera_count").get<int>();
    cfg.identities = j.at("identities").get<int>();
    cfg.sightings_min = j.at("sightings_min").get<int>();
    cfg.sightings_max = j.at("sightings_max").get<int>();
    cfg.feature_dim = j.at("feature_dim").get<int>();
    cfg.identity_signal = j.at("identity_signal").get<double>();
    cfg.noise_std = j.at("noise_std").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("start_window_frames")) {
      cfg.start_window_frames = j.at("start_window_frames").get<std::int64_t>();
    }
    cfg.topology.clear();
    for (const auto& edge : j.at("topology")) {
      CameraPairKey key{edge.at("from").get<int>(), edge.at("to").get<int>()};
      TransitMixture mixture;
      for (const auto& comp : edge.at("components")) {
        mixture.push_back({comp.at("mean_frames").get<double>(),
                           comp.at("std_frames").get<double>(),
                           comp.at("weight").get<double>()});
      }
      if (cfg.topology.count(key)) {
        throw ParseError("sim config: duplicate topology edge " +
                         std::to_string(key.from_camera) + "->" + std::to_string(key.to_camera));
      }
      cfg.topology[key] = std::move(mixture);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sim config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline nlohmann::json sim_config_to_json(const SimConfig& cfg) {
  nlohmann::json topology = nlohmann::json::array();
  for (const auto& [key, mixture] : cfg.topology) {
    nlohmann::json components = nlohmann::json::array();
    for (const TransitComponent& c : mixture) {
      components.push_back({{"mean_frames", c.mean_frames},
                            {"std_frames", c.std_frames},
                            {"weight", c.weight}});
    }
    topology.push_back({{"from", key.from_camera},
                        {"to", key.to_camera},
                        {"components", components}});
  }
  return {{"camera_count", cfg.camera_count},
          {"identities", cfg.identities},
          {"sightings_min", cfg.sightings_min},
          {"sightings_max", cfg.sightings_max},
          {"feature_dim", cfg.feature_dim},
          {"identity_signal", cfg.identity_signal},
          {"noise_std", cfg.noise_std},
          {"start_window_frames", cfg.start_window_frames},
          {"seed", cfg.seed},
          {"topology", topology}};
}

inline SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sim config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("sim config '" + path + "': " + e.what());
  }
  return sim_config_from_json(j);
}

}  // namespace stfuse
