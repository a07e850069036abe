// Command-line surface for the stfuse pipeline: fit the transition model,
// score and evaluate query/gallery splits, run the four-mode ablation, and
// generate synthetic camera-network datasets.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stfuse/stfuse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit code classes, documented in the README.
constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitValidation = 4;

const std::map<std::string, stfuse::FusionMode> kModeNames = {
    {"visual_only", stfuse::FusionMode::VisualOnly},
    {"st_only", stfuse::FusionMode::StOnly},
    {"naive_product", stfuse::FusionMode::NaiveProduct},
    {"joint_ls", stfuse::FusionMode::JointLogisticSmoothing},
};

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw stfuse::Error("cannot write " + path.string());
  out << content;
  if (!out) throw stfuse::Error("failed writing " + path.string());
}

json st_config_to_json(const stfuse::STConfig& c) {
  return {{"bin_width_frames", c.bin_width_frames},
          {"kernel_sigma", c.kernel_sigma},
          {"truncation_sigmas", c.truncation_sigmas},
          {"max_bins", c.max_bins}};
}

json fusion_config_to_json(const stfuse::FusionConfig& c) {
  return {{"lambda0", c.lambda0},
          {"gamma0", c.gamma0},
          {"lambda1", c.lambda1},
          {"gamma1", c.gamma1},
          {"mode", stfuse::fusion_mode_name(c.mode)}};
}

Eigen::MatrixXd feature_rows(const stfuse::Dataset& d) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(d.size()), d.feature_dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = d.detections[i].feature.transpose();
  }
  return m;
}

stfuse::Dataset load_joined(const std::string& meta_path, const std::string& feature_path,
                            stfuse::DatasetRole role) {
  auto meta = stfuse::parse_metadata_csv(meta_path, role);
  const auto features = stfuse::read_feature_matrix(feature_path);
  auto joined = stfuse::with_features(std::move(meta), features);
  const auto violations = stfuse::validate_dataset(joined);
  if (!violations.empty()) {
    throw stfuse::ValidationError(meta_path + ": " + violations.front().message);
  }
  return joined;
}

std::string format_ranking_csv(const std::vector<stfuse::RankedResult>& ranked,
                               const stfuse::ScoreMatrix& scores) {
  std::string out = "query_index,rank,gallery_index,score\n";
  char buf[96];
  for (const auto& r : ranked) {
    for (std::size_t pos = 0; pos < r.ordered_gallery.size(); ++pos) {
      const int j = r.ordered_gallery[pos];
      std::snprintf(buf, sizeof(buf), "%d,%zu,%d,%.17g\n", r.query_index, pos + 1, j,
                    scores.values(r.query_index, j));
      out += buf;
    }
  }
  return out;
}

struct EvalInputs {
  std::string query_meta, query_features, gallery_meta, gallery_features, model, out_dir;
  stfuse::FusionConfig fusion;
  std::string mode_name;
  int k_max = 50;
  int workers = 1;
  bool emit_ranking = false;
};

void add_common_eval_options(CLI::App* cmd, EvalInputs& in, bool with_mode) {
  cmd->add_option("--query-meta", in.query_meta, "Query metadata CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--query-features", in.query_features, "Query feature matrix (.fmat)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--gallery-meta", in.gallery_meta, "Gallery metadata CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--gallery-features", in.gallery_features, "Gallery feature matrix (.fmat)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--model", in.model, "Fitted transition model file")->check(CLI::ExistingFile);
  cmd->add_option("--lambda0", in.fusion.lambda0, "Visual-factor smoothing coefficient")
      ->capture_default_str();
  cmd->add_option("--gamma0", in.fusion.gamma0, "Visual-factor shrinking coefficient")
      ->capture_default_str();
  cmd->add_option("--lambda1", in.fusion.lambda1, "Transition-factor smoothing coefficient")
      ->capture_default_str();
  cmd->add_option("--gamma1", in.fusion.gamma1, "Transition-factor shrinking coefficient")
      ->capture_default_str();
  cmd->add_option("--k-max", in.k_max, "CMC curve length")
      ->capture_default_str()
      ->check(CLI::Range(10, 1000000));
  cmd->add_option("--workers", in.workers, "Scoring worker threads (never changes results)")
      ->capture_default_str()
      ->check(CLI::Range(1, 4096));
  cmd->add_option("--out-dir", in.out_dir, "Run directory for reports and manifest")->required();
  if (with_mode) {
    cmd->add_option("--mode", in.mode_name, "Fusion mode")
        ->required()
        ->check(CLI::IsMember({"visual_only", "st_only", "naive_product", "joint_ls"}));
  }
  cmd->add_flag("--emit-ranking", in.emit_ranking, "Also write the full ranked lists");
}

int run_evaluate(EvalInputs& in) {
  in.fusion.mode = kModeNames.at(in.mode_name);
  const bool needs_model = in.fusion.mode != stfuse::FusionMode::VisualOnly;
  if (needs_model && in.model.empty()) {
    std::cerr << "evaluate: --model is required for mode '" << in.mode_name
              << "' (only visual_only runs without a transition model)\n";
    return kExitUsage;
  }

  const auto queries = load_joined(in.query_meta, in.query_features, stfuse::DatasetRole::Query);
  const auto gallery =
      load_joined(in.gallery_meta, in.gallery_features, stfuse::DatasetRole::Gallery);
  stfuse::STModel model;
  if (needs_model) model = stfuse::load_model(in.model);

  const auto scores = stfuse::fused_score_matrix(queries, gallery, model, in.fusion, in.workers);
  const auto report = stfuse::evaluate(scores, queries, gallery, in.k_max);

  fs::create_directories(in.out_dir);
  const json report_json = stfuse::report_to_json(report, in.fusion.mode, queries.size());
  write_text_file(fs::path(in.out_dir) / "report.json", stfuse::json_to_string(report_json));
  const std::string table = stfuse::format_report_table({{in.mode_name, report}});
  write_text_file(fs::path(in.out_dir) / "report.txt", table);

  json outputs = {{"report_json", "report.json"}, {"report_table", "report.txt"}};
  if (in.emit_ranking) {
    const auto ranked = stfuse::rank(scores, queries, gallery);
    write_text_file(fs::path(in.out_dir) / "ranking.csv", format_ranking_csv(ranked, scores));
    outputs["ranking"] = "ranking.csv";
  }
  const json manifest = {{"command", "evaluate"},
                         {"inputs",
                          {{"query_meta", in.query_meta},
                           {"query_features", in.query_features},
                           {"gallery_meta", in.gallery_meta},
                           {"gallery_features", in.gallery_features},
                           {"model", in.model}}},
                         {"fusion_config", fusion_config_to_json(in.fusion)},
                         {"k_max", in.k_max},
                         {"outputs", outputs}};
  write_text_file(fs::path(in.out_dir) / "manifest.json", stfuse::json_to_string(manifest));

  std::cout << table;
  return 0;
}

int run_ablate(EvalInputs& in) {
  if (in.model.empty()) {
    std::cerr << "ablate: --model is required (three of the four modes use the transition model)\n";
    return kExitUsage;
  }
  const auto queries = load_joined(in.query_meta, in.query_features, stfuse::DatasetRole::Query);
  const auto gallery =
      load_joined(in.gallery_meta, in.gallery_features, stfuse::DatasetRole::Gallery);
  const auto model = stfuse::load_model(in.model);

  // Both score ingredients are shared across the four modes.
  const Eigen::MatrixXd visual = stfuse::visual_score_matrix(queries, gallery).values;
  const Eigen::MatrixXd st_prob =
      stfuse::st_probability_matrix(queries, gallery, model, in.workers);

  const std::vector<std::string> order = {"visual_only", "st_only", "naive_product", "joint_ls"};
  std::vector<std::pair<std::string, stfuse::EvalReport>> rows;
  json reports;
  for (const std::string& name : order) {
    stfuse::FusionConfig cfg = in.fusion;
    cfg.mode = kModeNames.at(name);
    const auto scores = stfuse::fuse_score_parts(visual, st_prob, cfg, in.workers);
    const auto report = stfuse::evaluate(scores, queries, gallery, in.k_max);
    reports[name] = stfuse::report_to_json(report, cfg.mode, queries.size());
    rows.emplace_back(name, report);
  }

  fs::create_directories(in.out_dir);
  const std::string table = stfuse::format_report_table(rows);
  write_text_file(fs::path(in.out_dir) / "ablation.txt", table);
  write_text_file(fs::path(in.out_dir) / "ablation.json",
                  stfuse::json_to_string(json{{"modes", reports}}));
  const json manifest = {{"command", "ablate"},
                         {"inputs",
                          {{"query_meta", in.query_meta},
                           {"query_features", in.query_features},
                           {"gallery_meta", in.gallery_meta},
                           {"gallery_features", in.gallery_features},
                           {"model", in.model}}},
                         {"fusion_config", fusion_config_to_json(in.fusion)},
                         {"k_max", in.k_max},
                         {"outputs", {{"table", "ablation.txt"}, {"reports", "ablation.json"}}}};
  write_text_file(fs::path(in.out_dir) / "manifest.json", stfuse::json_to_string(manifest));

  std::cout << table;
  return 0;
}

struct FitInputs {
  std::string train_meta, out_path;
  stfuse::STConfig cfg;
};

int run_fit_st(const FitInputs& in) {
  const auto train = stfuse::parse_metadata_csv(in.train_meta, stfuse::DatasetRole::Train);
  const auto model = stfuse::fit(train, in.cfg);
  stfuse::save_model(model, in.out_path);

  std::int64_t total = 0;
  for (const auto& [key, count] : model.pair_counts) {
    std::printf("pair %d->%d: %lld positive pairs, %zu bins\n", key.from_camera, key.to_camera,
                static_cast<long long>(count), model.pmf.at(key).size());
    total += count;
  }
  std::printf("fitted %zu camera pairs from %zu detections (%lld positive pairs)\n",
              model.pmf.size(), train.size(), static_cast<long long>(total));
  if (model.pmf.empty()) {
    std::cerr << "warning: no positive cross-camera pairs found; the model is empty and every "
                 "transition probability will be 0\n";
  }
  return 0;
}

struct SimInputs {
  std::string config_path, out_dir;
};

int run_simulate(const SimInputs& in) {
  const auto cfg = stfuse::load_sim_config(in.config_path);
  const auto sim = stfuse::simulate(cfg);

  fs::create_directories(in.out_dir);
  const fs::path dir(in.out_dir);
  stfuse::write_metadata_csv(sim.train, (dir / "train.csv").string(), "t");
  stfuse::write_metadata_csv(sim.query, (dir / "query.csv").string(), "q");
  stfuse::write_metadata_csv(sim.gallery, (dir / "gallery.csv").string(), "g");
  stfuse::write_feature_matrix(feature_rows(sim.train), stfuse::FeatureDType::Float64,
                               (dir / "train.fmat").string());
  stfuse::write_feature_matrix(feature_rows(sim.query), stfuse::FeatureDType::Float64,
                               (dir / "query.fmat").string());
  stfuse::write_feature_matrix(feature_rows(sim.gallery), stfuse::FeatureDType::Float64,
                               (dir / "gallery.fmat").string());
  write_text_file(dir / "ground_truth.json",
                  stfuse::json_to_string(json{{"topology", stfuse::sim_config_to_json(cfg)["topology"]}}));

  const json manifest = {{"command", "simulate"},
                         {"config", stfuse::sim_config_to_json(cfg)},
                         {"outputs",
                          {{"train_meta", "train.csv"},
                           {"train_features", "train.fmat"},
                           {"query_meta", "query.csv"},
                           {"query_features", "query.fmat"},
                           {"gallery_meta", "gallery.csv"},
                           {"gallery_features", "gallery.fmat"},
                           {"ground_truth", "ground_truth.json"}}}};
  write_text_file(dir / "manifest.json", stfuse::json_to_string(manifest));

  std::printf("simulated %d identities: %zu train / %zu query / %zu gallery detections\n",
              cfg.identities, sim.train.size(), sim.query.size(), sim.gallery.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stfuse: spatial-temporal re-ranking for cross-camera identity retrieval"};
  app.require_subcommand(1);

  EvalInputs eval_in;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a query/gallery split and report CMC/mAP");
  add_common_eval_options(eval_cmd, eval_in, /*with_mode=*/true);

  EvalInputs ablate_in;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Run all four fusion modes and produce one comparison table");
  add_common_eval_options(ablate_cmd, ablate_in, /*with_mode=*/false);

  FitInputs fit_in;
  auto* fit_cmd = app.add_subcommand("fit-st", "Fit the transition-time model from labeled metadata");
  fit_cmd->add_option("--train-meta", fit_in.train_meta, "Labeled training metadata CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit_in.out_path, "Output model file")->required();
  fit_cmd->add_option("--bin-width", fit_in.cfg.bin_width_frames, "Histogram bin width in frames")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--sigma", fit_in.cfg.kernel_sigma, "Gaussian kernel sigma, in bins")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--truncation", fit_in.cfg.truncation_sigmas, "Kernel truncation, in sigmas")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--max-bins", fit_in.cfg.max_bins, "Histogram length cap")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  SimInputs sim_in;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic camera-network dataset");
  sim_cmd->add_option("--config", sim_in.config_path, "Simulator config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--out-dir", sim_in.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (eval_cmd->parsed()) return run_evaluate(eval_in);
    if (ablate_cmd->parsed()) return run_ablate(ablate_in);
    if (fit_cmd->parsed()) return run_fit_st(fit_in);
    if (sim_cmd->parsed()) return run_simulate(sim_in);
    return kExitUsage;
  } catch (const stfuse::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const stfuse::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const stfuse::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
