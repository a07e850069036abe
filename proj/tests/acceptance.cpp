// Acceptance suite: one checkable criterion per runner, each printing a
// single [PASS]/[FAIL]/[SKIP] line. Run with no arguments for the whole
// suite or with `--criterion N` for one criterion (used by ctest).

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "stfuse/stfuse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stfuse;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path scratch_dir() {
  static int counter = 0;
  const auto dir =
      fs::temp_directory_path() / ("stfuse_acceptance_" + std::to_string(::getpid()) + "_" +
                                   std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STFUSE_CLI_PATH) + " " + args + " > /dev/null 2> /dev/null";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// --------------------------------------------------------------------------
// Criterion 1: paper-scale reproduction needs trained CNN features and the
// full datasets; only the integration path ships. Conditional, not runnable
// in this suite.

bool criterion1(std::string& detail) {
  detail =
      "conditional criterion, excluded from the default suite: reproducing the "
      "reference rank-1/mAP numbers requires externally supplied CNN feature files "
      "and full dataset metadata (see README, 'Running on real data'); with those "
      "inputs `stfuse ablate` produces the four-mode comparison this criterion ranks";
  return true;  // reported as SKIP by the caller
}

// --------------------------------------------------------------------------
// Criterion 2: smoothing against an independently coded full convolution.

bool criterion2(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  detail::SimRng rng(1002);
  double worst_trunc = 0.0, worst_full = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k_bins = static_cast<int>(rng.uniform_int(1, 500));
    std::vector<double> raw(static_cast<std::size_t>(k_bins), 0.0);
    if (trial % 5 == 0) {
      // Spike histograms: the worst case for the truncation error.
      raw[static_cast<std::size_t>(rng.uniform_int(0, k_bins - 1))] = 100.0;
    } else {
      for (double& v : raw) {
        if (rng.uniform01() < 0.4) v = std::floor(rng.uniform01() * 40.0);
      }
      raw[static_cast<std::size_t>(rng.uniform_int(0, k_bins - 1))] += 10.0;
    }

    STConfig cfg;  // sigma = 50, the production default
    const auto reference = oracle::smooth_reference(raw, cfg.kernel_sigma);

    cfg.truncation_sigmas = 3.0;
    const auto trunc = smooth(raw, cfg);
    cfg.truncation_sigmas = 1e9;
    const auto full = smooth(raw, cfg);

    for (std::size_t i = 0; i < reference.size(); ++i) {
      worst_trunc = std::max(worst_trunc, std::abs(trunc[i] - reference[i]));
      worst_full = std::max(worst_full, std::abs(full[i] - reference[i]));
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream msg;
  msg << "max |3-sigma - full| = " << worst_trunc << " (limit 1e-4), max |untruncated - full| = "
      << worst_full << " (limit 1e-9), " << elapsed << " s (limit 5)";
  detail = msg.str();
  return worst_trunc <= 1e-4 && worst_full <= 1e-9 && elapsed < 5.0;
}

// --------------------------------------------------------------------------
// Criterion 3: histogram totals against brute-force pair enumeration.

bool criterion3(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  detail::SimRng rng(1003);
  for (int trial = 0; trial < 50; ++trial) {
    const int cameras = static_cast<int>(rng.uniform_int(2, 5));
    const int n = static_cast<int>(rng.uniform_int(2, 200));
    const int people = static_cast<int>(rng.uniform_int(1, 15));
    Dataset data;
    data.camera_count = cameras;
    for (int i = 0; i < n; ++i) {
      Detection d;
      d.camera_id = static_cast<int>(rng.uniform_int(0, cameras - 1));
      d.timestamp = rng.uniform_int(0, 8000);
      if (rng.uniform01() < 0.06) {
        d.is_distractor = true;
      } else {
        d.person_id = static_cast<int>(rng.uniform_int(0, people - 1));
      }
      data.detections.push_back(d);
    }

    STConfig cfg;
    cfg.bin_width_frames = static_cast<int>(rng.uniform_int(50, 200));
    const auto got = fit_histogram(data, cfg);
    const auto want = oracle::histogram_reference(data, cfg.bin_width_frames, cfg.max_bins);
    if (got != want) {
      detail = "trial " + std::to_string(trial) + ": histogram differs from enumeration";
      return false;
    }
  }
  const double elapsed = seconds_since(start);
  detail = "50 datasets match exactly, " + std::to_string(elapsed) + " s (limit 5)";
  return elapsed < 5.0;
}

// --------------------------------------------------------------------------
// Criterion 4: logistic closed forms, floor, monotonicity.

bool criterion4(std::string& detail) {
  if (std::abs(logistic(0.0, 2.0, 5.0) - 1.0 / 3.0) > 1e-12 ||
      std::abs(logistic(0.0, 1.0, 5.0) - 0.5) > 1e-12) {
    detail = "closed-form values off";
    return false;
  }
  FusionConfig cfg;
  detail::SimRng rng(1004);
  for (int trial = 0; trial < 100000; ++trial) {
    const double s = -1.0 + 2.0 * rng.uniform01();
    const double p = rng.uniform01();
    const double score = joint_score(s, p, cfg);
    const double floor = logistic(s, cfg.lambda0, cfg.gamma0) / (1.0 + cfg.lambda1);
    if (score < floor - 1e-15) {
      detail = "floor violated at s=" + std::to_string(s) + " p=" + std::to_string(p);
      return false;
    }
  }
  for (int trial = 0; trial < 100000; ++trial) {
    double s_lo = -1.0 + 2.0 * rng.uniform01();
    double s_hi = -1.0 + 2.0 * rng.uniform01();
    const double p = rng.uniform01();
    if (s_lo != s_hi) {
      if (s_lo > s_hi) std::swap(s_lo, s_hi);
      if (joint_score(s_hi, p, cfg) <= joint_score(s_lo, p, cfg)) {
        detail = "not increasing in s at p=" + std::to_string(p);
        return false;
      }
    }
    double p_lo = rng.uniform01();
    double p_hi = rng.uniform01();
    const double s = -1.0 + 2.0 * rng.uniform01();
    if (p_lo != p_hi) {
      if (p_lo > p_hi) std::swap(p_lo, p_hi);
      if (joint_score(s, p_hi, cfg) <= joint_score(s, p_lo, cfg)) {
        detail = "not increasing in p_st at s=" + std::to_string(s);
        return false;
      }
    }
  }
  detail = "closed forms exact, floor and monotonicity hold on 1e5 samples each";
  return true;
}

// --------------------------------------------------------------------------
// Criterion 5: the motivating score pair, asserted exactly as specified.

bool criterion5(std::string& detail) {
  FusionConfig joint;  // defaults
  FusionConfig naive;
  naive.mode = FusionMode::NaiveProduct;

  const double ls_first = joint_score(0.9, 0.01, joint);
  const double ls_second = joint_score(0.3, 0.1, joint);
  const double naive_first = joint_score(0.9, 0.01, naive);
  const double naive_second = joint_score(0.3, 0.1, naive);

  const bool ls_inverts = ls_first > ls_second;
  const bool naive_prefers_second = naive_second > naive_first;

  std::ostringstream msg;
  msg << "joint_ls(0.9, 0.01) = " << ls_first << " vs joint_ls(0.3, 0.1) = " << ls_second
      << " (required: first > second); naive(0.9, 0.01) = " << naive_first
      << " vs naive(0.3, 0.1) = " << naive_second << " (required: second > first)";
  if (!ls_inverts) {
    msg << " -- the joint_ls ordering does not hold under the default coefficients "
           "(1/(1+e^-4.5)) * (1/(1+2e^-0.05)) < (1/(1+e^-1.5)) * (1/(1+2e^-0.5)); "
           "no coefficient assignment satisfies this together with criterion 4's floor";
  }
  detail = msg.str();
  return ls_inverts && naive_prefers_second;
}

// --------------------------------------------------------------------------
// Criterion 6: evaluation against the from-definition reference.

bool criterion6(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  detail::SimRng rng(1006);
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const int cameras = static_cast<int>(rng.uniform_int(2, 4));
    const int people = static_cast<int>(rng.uniform_int(2, 10));
    const int nq = static_cast<int>(rng.uniform_int(1, 20));
    const int ng = static_cast<int>(rng.uniform_int(2, 100));
    Dataset queries, gallery;
    queries.camera_count = gallery.camera_count = cameras;
    for (int i = 0; i < nq; ++i) {
      Detection d;
      d.camera_id = static_cast<int>(rng.uniform_int(0, cameras - 1));
      d.person_id = static_cast<int>(rng.uniform_int(0, people - 1));
      queries.detections.push_back(d);
    }
    for (int j = 0; j < ng; ++j) {
      Detection d;
      d.camera_id = static_cast<int>(rng.uniform_int(0, cameras - 1));
      if (rng.uniform01() < 0.12) {
        d.is_distractor = true;
      } else {
        d.person_id = static_cast<int>(rng.uniform_int(0, people - 1));
      }
      gallery.detections.push_back(d);
    }
    ScoreMatrix scores;
    scores.values.resize(nq, ng);
    for (int i = 0; i < nq; ++i) {
      for (int j = 0; j < ng; ++j) {
        scores.values(i, j) = std::floor(rng.uniform01() * 30.0) / 30.0;  // forces ties
      }
    }

    bool any_positive = false;
    for (const auto& q : queries.detections) {
      for (const auto& g : gallery.detections) {
        if (!g.is_distractor && g.person_id && *g.person_id == *q.person_id &&
            g.camera_id != q.camera_id) {
          any_positive = true;
        }
      }
    }
    if (!any_positive) continue;
    ++checked;

    const int k_max = 15;
    const auto ranked = rank(scores, queries, gallery);
    const auto curve = cmc(ranked, queries, gallery, k_max);
    const auto ap = mean_ap(ranked, queries, gallery);
    const auto ref = oracle::evaluate_reference(scores.values, queries, gallery, k_max);
    for (std::size_t k = 0; k < curve.size(); ++k) {
      worst = std::max(worst, std::abs(curve[k] - ref.cmc[k]));
    }
    worst = std::max(worst, std::abs(ap.map - ref.map));

    // Rank invariance: positive shift then cube.
    ScoreMatrix cubed;
    cubed.values = (scores.values.array() + 2.0).cube();
    const auto ap_cubed = mean_ap(rank(cubed, queries, gallery), queries, gallery);
    worst = std::max(worst, std::abs(ap_cubed.map - ap.map));
  }
  const double elapsed = seconds_since(start);
  std::ostringstream msg;
  msg << "100 instances, max deviation " << worst << " (limit 1e-9), " << elapsed << " s";
  detail = msg.str();
  return worst <= 1e-9;
}

// --------------------------------------------------------------------------
// Criterion 7: end-to-end synthetic win of fusion over visual-only.

bool criterion7(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = oracle::bimodal_benchmark_config();
  const auto sim = simulate(cfg);
  const auto model = fit(sim.train, STConfig{});

  const Eigen::MatrixXd visual = visual_score_matrix(sim.query, sim.gallery).values;
  const Eigen::MatrixXd st_prob = st_probability_matrix(sim.query, sim.gallery, model);

  FusionConfig joint;
  FusionConfig vis;
  vis.mode = FusionMode::VisualOnly;
  const auto joint_report =
      evaluate(fuse_score_parts(visual, st_prob, joint), sim.query, sim.gallery, 10);
  const auto vis_report =
      evaluate(fuse_score_parts(visual, st_prob, vis), sim.query, sim.gallery, 10);

  const double gap = joint_report.cmc[0] - vis_report.cmc[0];
  const double elapsed = seconds_since(start);
  std::ostringstream msg;
  msg << "joint_ls rank-1 = " << joint_report.cmc[0] << ", visual_only rank-1 = "
      << vis_report.cmc[0] << ", gap = " << 100.0 * gap << " points (limit >= 10), " << elapsed
      << " s (limit 60)";
  detail = msg.str();
  return gap >= 0.10 && elapsed < 60.0;
}

// --------------------------------------------------------------------------
// Criterion 8: planted-distribution recovery in total variation.

bool criterion8(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  SimConfig cfg;
  cfg.camera_count = 2;
  cfg.identities = 9000;  // 4500 train walks, ~2250 per direction
  cfg.sightings_min = 2;
  cfg.sightings_max = 2;  // single hop: every positive pair is a direct transit
  cfg.feature_dim = 2;
  cfg.identity_signal = 1.0;
  cfg.noise_std = 0.1;
  cfg.start_window_frames = 100000;
  cfg.seed = 1008;
  cfg.topology[{0, 1}] = {{3000.0, 300.0, 0.5}, {12000.0, 500.0, 0.5}};
  cfg.topology[{1, 0}] = {{6000.0, 400.0, 0.5}, {20000.0, 600.0, 0.5}};
  const auto sim = simulate(cfg);

  STConfig st;
  st.kernel_sigma = 1.0;
  const auto model = fit(sim.train, st);

  double worst_tv = 0.0;
  std::int64_t min_pairs = std::numeric_limits<std::int64_t>::max();
  for (const auto& [key, pmf] : model.pmf) {
    min_pairs = std::min(min_pairs, model.pair_counts.at(key));
    const auto planted =
        binned_mixture_pmf(cfg.topology.at(key), st.bin_width_frames, static_cast<int>(pmf.size()));
    worst_tv = std::max(worst_tv, oracle::total_variation(pmf, planted));
  }
  const double elapsed = seconds_since(start);
  std::ostringstream msg;
  msg << "min positive pairs per camera pair = " << min_pairs << " (required >= 2000), worst TV = "
      << worst_tv << " (limit 0.1), " << elapsed << " s (limit 30)";
  detail = msg.str();
  return min_pairs >= 2000 && worst_tv <= 0.1 && elapsed < 30.0;
}

// --------------------------------------------------------------------------
// Criterion 9: CLI artifacts byte-identical across reruns and worker counts.

bool criterion9(std::string& detail) {
  auto cfg = oracle::bimodal_benchmark_config();
  cfg.identities = 120;
  const std::string config_str = json(sim_config_to_json(cfg)).dump(2) + "\n";

  const auto sim_a = scratch_dir();
  const auto sim_b = scratch_dir();
  write_file(sim_a / "sim.json", config_str);
  write_file(sim_b / "sim.json", config_str);
  if (run_cli("simulate --config " + (sim_a / "sim.json").string() + " --out-dir " +
              sim_a.string()) != 0 ||
      run_cli("simulate --config " + (sim_b / "sim.json").string() + " --out-dir " +
              sim_b.string()) != 0) {
    detail = "simulate failed";
    return false;
  }
  for (const char* name : {"train.csv", "train.fmat", "query.csv", "query.fmat", "gallery.csv",
                           "gallery.fmat", "ground_truth.json", "manifest.json"}) {
    if (slurp(sim_a / name) != slurp(sim_b / name)) {
      detail = std::string("simulate artifact differs across runs: ") + name;
      return false;
    }
  }

  const auto model_a = sim_a / "model.stm";
  const auto model_b = sim_a / "model2.stm";
  if (run_cli("fit-st --train-meta " + (sim_a / "train.csv").string() + " --out " +
              model_a.string()) != 0 ||
      run_cli("fit-st --train-meta " + (sim_a / "train.csv").string() + " --out " +
              model_b.string()) != 0) {
    detail = "fit-st failed";
    return false;
  }
  if (slurp(model_a) != slurp(model_b)) {
    detail = "model file differs across fit-st runs";
    return false;
  }

  const std::string inputs = " --query-meta " + (sim_a / "query.csv").string() +
                             " --query-features " + (sim_a / "query.fmat").string() +
                             " --gallery-meta " + (sim_a / "gallery.csv").string() +
                             " --gallery-features " + (sim_a / "gallery.fmat").string();
  const auto eval1 = scratch_dir();
  const auto eval2 = scratch_dir();
  const auto eval8 = scratch_dir();
  const std::string eval_args =
      "evaluate" + inputs + " --mode joint_ls --model " + model_a.string() + " --emit-ranking";
  if (run_cli(eval_args + " --workers 1 --out-dir " + eval1.string()) != 0 ||
      run_cli(eval_args + " --workers 1 --out-dir " + eval2.string()) != 0 ||
      run_cli(eval_args + " --workers 8 --out-dir " + eval8.string()) != 0) {
    detail = "evaluate failed";
    return false;
  }
  for (const char* name : {"report.json", "report.txt", "ranking.csv", "manifest.json"}) {
    if (slurp(eval1 / name) != slurp(eval2 / name)) {
      detail = std::string("evaluate artifact differs across reruns: ") + name;
      return false;
    }
    if (slurp(eval1 / name) != slurp(eval8 / name)) {
      detail = std::string("evaluate artifact differs between 1 and 8 workers: ") + name;
      return false;
    }
  }

  const auto abl1 = scratch_dir();
  const auto abl8 = scratch_dir();
  const std::string abl_args = "ablate" + inputs + " --model " + model_a.string();
  if (run_cli(abl_args + " --workers 1 --out-dir " + abl1.string()) != 0 ||
      run_cli(abl_args + " --workers 8 --out-dir " + abl8.string()) != 0) {
    detail = "ablate failed";
    return false;
  }
  for (const char* name : {"ablation.json", "ablation.txt", "manifest.json"}) {
    if (slurp(abl1 / name) != slurp(abl8 / name)) {
      detail = std::string("ablate artifact differs between 1 and 8 workers: ") + name;
      return false;
    }
  }

  detail = "simulate, fit-st, evaluate and ablate artifacts byte-identical across reruns "
           "and across 1 vs 8 workers";
  return true;
}

// --------------------------------------------------------------------------
// Criterion 10: rank-1 plateau under lambda1/gamma1 sweeps.

bool criterion10(std::string& detail) {
  const auto cfg = oracle::bimodal_benchmark_config();
  const auto sim = simulate(cfg);
  const auto model = fit(sim.train, STConfig{});
  const Eigen::MatrixXd visual = visual_score_matrix(sim.query, sim.gallery).values;
  const Eigen::MatrixXd st_prob = st_probability_matrix(sim.query, sim.gallery, model);

  double lo = 1.0, hi = 0.0;
  for (const double lambda1 : {0.4, 1.0, 2.0, 2.8}) {
    for (const double gamma1 : {1.0, 3.0, 5.0, 7.0}) {
      FusionConfig fusion;
      fusion.lambda1 = lambda1;
      fusion.gamma1 = gamma1;
      const auto report =
          evaluate(fuse_score_parts(visual, st_prob, fusion), sim.query, sim.gallery, 10);
      lo = std::min(lo, report.cmc[0]);
      hi = std::max(hi, report.cmc[0]);
    }
  }
  std::ostringstream msg;
  msg << "joint_ls rank-1 across the 4x4 sweep: [" << lo << ", " << hi << "], spread = "
      << 100.0 * (hi - lo) << " points (limit 3)";
  detail = msg.str();
  return hi - lo <= 0.03;
}

struct Criterion {
  int id;
  const char* name;
  bool skip;
  std::function<bool(std::string&)> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "paper-number reproduction (conditional integration path)", true, criterion1},
    {2, "Parzen smoothing matches the independent convolution", false, criterion2},
    {3, "histogram counts match brute-force pair enumeration", false, criterion3},
    {4, "logistic closed forms, score floor and monotonicity", false, criterion4},
    {5, "motivating score pair orders as specified in both modes", false, criterion5},
    {6, "CMC/mAP match the from-definition reference", false, criterion6},
    {7, "synthetic end-to-end fusion win of at least 10 points", false, criterion7},
    {8, "fitted transitions recover the planted mixtures (TV <= 0.1)", false, criterion8},
    {9, "CLI artifacts are deterministic across runs and workers", false, criterion9},
    {10, "rank-1 plateau across the lambda1/gamma1 sweep", false, criterion10},
};

int run_one(const Criterion& c) {
  std::string detail;
  if (c.skip) {
    c.run(detail);
    std::cout << "[SKIP] criterion " << c.id << ": " << c.name << " -- " << detail << "\n";
    return 0;
  }
  bool ok = false;
  try {
    ok = c.run(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name << " -- "
            << detail << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  int wanted = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      wanted = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: stfuse_acceptance [--criterion N]\n";
      return 64;
    }
  }

  int failures = 0;
  for (const auto& c : kCriteria) {
    if (wanted != 0 && c.id != wanted) continue;
    failures += run_one(c);
  }
  return failures;
}
