// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: register, evaluate, perturb, interpolate, and a
// sweep runner for occlusion/loss ablations. Exit codes: 0 success, 1 on
// parse or I/O failures, 2 when training aborts on a non-finite loss.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oar/log.hpp"
#include "oar/oar.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNonFinite = 2;

std::string format_t(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::vector<oar::MatchPair> resolve_pairs(
    const std::vector<oar::CorrespondenceSpec>& specs,
    const oar::PointCloud& target) {
  std::vector<oar::MatchPair> pairs;
  pairs.reserve(specs.size());
  for (const auto& spec : specs) {
    oar::MatchPair pair;
    pair.source_index = spec.source_index;
    if (spec.target_index >= 0) {
      if (spec.target_index >= static_cast<int>(target.size()))
        throw oar::IndexMismatchError("correspondence target index out of range");
      pair.target_point = target.points[static_cast<std::size_t>(spec.target_index)];
    } else {
      pair.target_point = spec.target_point;
    }
    pairs.push_back(pair);
  }
  return pairs;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw oar::IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// register

struct RegisterOptions {
  std::string source, target, out_dir, gt, pairs, config;
  oar::RegistrationConfig cfg;
  std::string kernel = "per_coordinate";
  std::string loss = "mcc";
  double beta = 1.0;  // effective only when --beta/config supplies it
};

void apply_config_file(const CLI::App* cmd, RegisterOptions& opt) {
  if (opt.config.empty()) return;
  std::ifstream in(opt.config);
  if (!in) throw oar::FileNotFoundError(opt.config);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw oar::ParseError(std::string("config: ") + e.what(), 0);
  }
  auto merge = [&](const char* flag, const char* key, auto& var) {
    using T = std::decay_t<decltype(var)>;
    if (cmd->count(flag) == 0 && j.contains(key)) var = j.at(key).get<T>();
  };
  merge("--source", "source", opt.source);
  merge("--target", "target", opt.target);
  merge("--out-dir", "out_dir", opt.out_dir);
  merge("--gt", "gt", opt.gt);
  merge("--pairs", "pairs", opt.pairs);
  merge("--epochs", "epochs", opt.cfg.epochs);
  merge("--lr", "lr", opt.cfg.lr);
  merge("--sigma2", "sigma2", opt.cfg.sigma2);
  merge("--k", "k", opt.cfg.k);
  merge("--alpha1", "alpha1", opt.cfg.alpha1);
  merge("--alpha2", "alpha2", opt.cfg.alpha2);
  merge("--seed", "seed", opt.cfg.seed);
  merge("--omega0", "omega0", opt.cfg.omega0);
  merge("--gram-eps", "gram_eps", opt.cfg.gram_eps);
  merge("--kernel", "kernel", opt.kernel);
  merge("--loss", "loss", opt.loss);
  if (cmd->count("--beta") == 0 && j.contains("beta"))
    opt.cfg.beta = j.at("beta").get<double>();
}

json input_entry(const std::string& path) {
  return {{"path", path}, {"fnv1a64", oar::hash_file(path)}};
}

int run_register(const CLI::App* cmd, RegisterOptions& opt) {
  apply_config_file(cmd, opt);
  if (opt.source.empty() || opt.target.empty() || opt.out_dir.empty()) {
    std::cerr << "error: --source, --target, and --out-dir are required\n\n"
              << cmd->help() << '\n';
    return kExitError;
  }
  if (cmd->count("--beta") > 0) opt.cfg.beta = opt.beta;
  opt.cfg.kernel_mode = opt.kernel == "euclidean"
                            ? oar::KernelConfig::Mode::euclidean
                            : oar::KernelConfig::Mode::per_coordinate;
  opt.cfg.data_term = opt.loss == "cd" ? oar::DataTerm::cd : oar::DataTerm::mcc;

  const oar::PointCloud source = oar::load_cloud(opt.source);
  const oar::PointCloud target = oar::load_cloud(opt.target);
  std::vector<oar::MatchPair> pairs;
  if (!opt.pairs.empty())
    pairs = resolve_pairs(oar::load_correspondences(opt.pairs), target);
  oar::log_info("registering " + std::to_string(source.size()) + " -> " +
                std::to_string(target.size()) + " points, " +
                std::to_string(opt.cfg.epochs) + " epochs");

  fs::create_directories(opt.out_dir);
  const auto out = [&](const char* name) {
    return (fs::path(opt.out_dir) / name).string();
  };

  json manifest;
  manifest["subcommand"] = "register";
  manifest["timestamp"] = oar::iso8601_now();
  manifest["inputs"]["source"] = input_entry(opt.source);
  manifest["inputs"]["target"] = input_entry(opt.target);
  if (!opt.gt.empty()) manifest["inputs"]["gt"] = input_entry(opt.gt);
  if (!opt.pairs.empty()) manifest["inputs"]["pairs"] = input_entry(opt.pairs);
  manifest["config"] = oar::config_to_json(opt.cfg, !pairs.empty());

  auto emit_outputs = [&](const oar::RegistrationResult& result) {
    oar::save_cloud(result.deformed, out("deformed.ply"),
                    oar::CloudFormat::ply_ascii);
    oar::save_displacement_csv(result, out("displacement.csv"));
    oar::save_loss_csv(result, out("loss.csv"));
    oar::save_params(result.params, out("checkpoint.oarn"));
    manifest["transforms"]["source"] =
        oar::transform_to_json(result.source_transform);
    manifest["transforms"]["target"] =
        oar::transform_to_json(result.target_transform);
    manifest["outputs"] = {{"deformed", out("deformed.ply")},
                           {"displacement", out("displacement.csv")},
                           {"loss", out("loss.csv")},
                           {"checkpoint", out("checkpoint.oarn")},
                           {"manifest", out("manifest.json")}};
    manifest["seconds"] = result.seconds;
    if (!opt.gt.empty()) {
      const oar::PointCloud gt = oar::load_cloud(opt.gt);
      const oar::Metrics metrics = oar::evaluate(result.deformed, gt);
      oar::save_metrics_json(metrics, out("metrics.json"));
      manifest["outputs"]["metrics"] = out("metrics.json");
      oar::log_info("metrics: epe=" + oar::format_double(metrics.epe) +
                    " accS=" + oar::format_double(metrics.acc_strict) +
                    " accR=" + oar::format_double(metrics.acc_relaxed) +
                    " outlier=" + oar::format_double(metrics.outlier));
    }
  };

  try {
    const oar::RegistrationResult result =
        oar::register_clouds(source, target, pairs, opt.cfg);
    emit_outputs(result);
    manifest["status"] = "ok";
    write_json(manifest, out("manifest.json"));
  } catch (const oar::NonFiniteLossError& e) {
    oar::log_info(std::string("aborted: ") + e.what());
    emit_outputs(e.partial);
    manifest["status"] = "non_finite_loss";
    manifest["abort_epoch"] = e.epoch;
    write_json(manifest, out("manifest.json"));
    return kExitNonFinite;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string pred, gt, errors_csv;
  bool raw = false;
  std::vector<double> thresholds;
};

int run_evaluate(const EvaluateOptions& opt) {
  const oar::PointCloud pred = oar::load_cloud(opt.pred);
  const oar::PointCloud gt = oar::load_cloud(opt.gt);
  oar::EvalThresholds thresholds;
  if (!opt.thresholds.empty()) {
    if (opt.thresholds.size() != 3)
      throw oar::InvalidArgumentError("--thresholds expects strict,relaxed,outlier");
    thresholds = {opt.thresholds[0], opt.thresholds[1], opt.thresholds[2]};
  }
  const oar::Metrics metrics =
      oar::evaluate(pred, gt,
                    opt.raw ? oar::EvalFrame::raw
                            : oar::EvalFrame::normalized_by_gt,
                    thresholds);
  if (!opt.errors_csv.empty())
    oar::save_per_point_errors_csv(metrics, opt.errors_csv);
  std::cout << oar::metrics_to_json(metrics).dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// perturb

struct PerturbOptions {
  std::string in, out;
  double occlude_fraction = 0.0;
  double noise_pct = 0.0;
  std::size_t outliers = 0;
  double outlier_ratio = -1.0;  // convenience: count = ratio * N
  std::uint64_t seed = 0;
  int seed_point = -1;
};

int run_perturb(const PerturbOptions& opt) {
  const oar::PointCloud input = oar::load_cloud(opt.in);
  std::size_t outlier_count = opt.outliers;
  if (opt.outlier_ratio >= 0.0)
    outlier_count = static_cast<std::size_t>(
        std::ceil(opt.outlier_ratio * static_cast<double>(input.size())));

  json manifest;
  manifest["subcommand"] = "perturb";
  manifest["timestamp"] = oar::iso8601_now();
  manifest["inputs"]["cloud"] = input_entry(opt.in);
  manifest["config"] = {{"occlude", opt.occlude_fraction},
                        {"noise", opt.noise_pct},
                        {"outliers", outlier_count},
                        {"seed", opt.seed},
                        {"seed_point", opt.seed_point}};

  // Disturbances compose in a fixed order: occlude, then noise, then outliers.
  oar::PointCloud cloud = input;
  const oar::OcclusionResult occluded =
      oar::occlude(cloud, opt.occlude_fraction, opt.seed, opt.seed_point);
  cloud = occluded.cloud;
  manifest["removed_indices"] = occluded.removed;
  manifest["config"]["seed_point"] = occluded.seed_point;

  cloud = oar::add_noise(cloud, opt.noise_pct, opt.seed + 1);

  const oar::OutlierResult with_outliers =
      oar::add_outliers(cloud, outlier_count, opt.seed + 2);
  cloud = with_outliers.cloud;
  manifest["outlier_indices"] = with_outliers.outlier_indices;

  oar::save_cloud(cloud, opt.out);
  manifest["outputs"] = {{"cloud", opt.out}};
  write_json(manifest, opt.out + ".manifest.json");
  oar::log_info("perturbed " + std::to_string(input.size()) + " -> " +
                std::to_string(cloud.size()) + " points");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// interpolate

struct InterpolateOptions {
  std::string source, checkpoint, target, out_dir;
  std::vector<double> t_list;
};

int run_interpolate(const InterpolateOptions& opt) {
  const oar::PointCloud source = oar::load_cloud(opt.source);
  const oar::NetworkParams params = oar::load_params(opt.checkpoint);
  const auto [source_norm, source_tf] = oar::normalize(source);

  // Displacements are deterministic in the checkpoint, so outputs reproduce
  // the original run's geometry exactly.
  oar::RegistrationResult result;
  result.params = params;
  result.source_normalized = oar::cloud_to_matrix(source_norm);
  result.displacement =
      oar::forward(params, result.source_normalized).displacement;
  result.source_transform = source_tf;
  result.target_transform =
      opt.target.empty() ? source_tf
                         : oar::normalize(oar::load_cloud(opt.target)).second;

  fs::create_directories(opt.out_dir);
  json manifest;
  manifest["subcommand"] = "interpolate";
  manifest["timestamp"] = oar::iso8601_now();
  manifest["inputs"]["source"] = input_entry(opt.source);
  manifest["inputs"]["checkpoint"] = input_entry(opt.checkpoint);
  if (!opt.target.empty()) manifest["inputs"]["target"] = input_entry(opt.target);
  manifest["config"]["t_list"] = opt.t_list;
  json outputs = json::array();

  for (const double t : opt.t_list) {
    const oar::PointCloud blended = oar::interpolate(source, result, t);
    const std::string path =
        (fs::path(opt.out_dir) / ("interp_t" + format_t(t) + ".ply")).string();
    oar::save_cloud(blended, path, oar::CloudFormat::ply_ascii);
    outputs.push_back(path);
  }
  manifest["outputs"]["clouds"] = outputs;
  write_json(manifest, (fs::path(opt.out_dir) / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  std::string source, gt, out_dir;
  std::vector<double> occlusion_levels{0.0, 0.1, 0.2, 0.3};
  std::vector<std::string> losses{"mcc", "cd"};
  std::vector<std::string> regularizers{"llr", "none"};
  int jobs = 1;
  oar::RegistrationConfig cfg;
};

struct SweepRun {
  std::string loss;
  std::string regularizer;
  double occlusion = 0.0;
  oar::Metrics metrics;
  double seconds = 0.0;
  bool non_finite = false;
};

int run_sweep(SweepOptions& opt) {
  const oar::PointCloud source = oar::load_cloud(opt.source);
  const oar::PointCloud gt = oar::load_cloud(opt.gt);
  fs::create_directories(opt.out_dir);

  std::vector<SweepRun> runs;
  for (const std::string& loss : opt.losses)
    for (const std::string& reg : opt.regularizers)
      for (const double occ : opt.occlusion_levels)
        runs.push_back({loss, reg, occ, {}, 0.0, false});

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::vector<std::exception_ptr> failures(runs.size());

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      SweepRun& run = runs[i];
      try {
        const oar::PointCloud target =
            oar::occlude(gt, run.occlusion, opt.cfg.seed + i).cloud;
        oar::RegistrationConfig cfg = opt.cfg;
        cfg.data_term =
            run.loss == "cd" ? oar::DataTerm::cd : oar::DataTerm::mcc;
        if (run.regularizer == "none") cfg.alpha2 = 0.0;
        const oar::RegistrationResult result =
            oar::register_clouds(source, target, cfg);
        run.metrics = oar::evaluate(result.deformed, gt);
        run.seconds = result.seconds;
        std::lock_guard<std::mutex> lock(log_mutex);
        oar::log_info("sweep " + run.loss + "/" + run.regularizer + "/occ=" +
                      oar::format_double(run.occlusion) + " accR=" +
                      oar::format_double(run.metrics.acc_relaxed));
      } catch (const oar::NonFiniteLossError&) {
        run.non_finite = true;
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };

  const int jobs = std::max(1, opt.jobs);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  const std::string csv_path = (fs::path(opt.out_dir) / "sweep.csv").string();
  std::ofstream csv(csv_path);
  if (!csv) throw oar::IoError("cannot open " + csv_path + " for writing");
  csv << "loss,regularizer,occlusion,epe,acc_strict,acc_relaxed,outlier,"
         "seconds,status\n";
  for (const SweepRun& run : runs) {
    csv << run.loss << ',' << run.regularizer << ','
        << oar::format_double(run.occlusion) << ',';
    if (run.non_finite) {
      csv << ",,,,," << "non_finite\n";
      continue;
    }
    csv << oar::format_double(run.metrics.epe) << ','
        << oar::format_double(run.metrics.acc_strict) << ','
        << oar::format_double(run.metrics.acc_relaxed) << ','
        << oar::format_double(run.metrics.outlier) << ','
        << oar::format_double(run.seconds) << ",ok\n";
  }
  csv.close();

  json manifest;
  manifest["subcommand"] = "sweep";
  manifest["timestamp"] = oar::iso8601_now();
  manifest["inputs"]["source"] = input_entry(opt.source);
  manifest["inputs"]["gt"] = input_entry(opt.gt);
  manifest["config"] = oar::config_to_json(opt.cfg, false);
  manifest["config"]["occlusion_levels"] = opt.occlusion_levels;
  manifest["config"]["losses"] = opt.losses;
  manifest["config"]["regularizers"] = opt.regularizers;
  manifest["config"]["jobs"] = jobs;
  manifest["outputs"] = {{"csv", csv_path}};
  write_json(manifest, (fs::path(opt.out_dir) / "manifest.json").string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oar - occlusion-aware non-rigid point cloud registration"};
  app.require_subcommand(1);

  RegisterOptions reg_opt;
  CLI::App* reg = app.add_subcommand(
      "register", "Deform a source cloud onto a target cloud");
  reg->add_option("--source", reg_opt.source, "Source cloud (complete)");
  reg->add_option("--target", reg_opt.target, "Target cloud (possibly occluded)");
  reg->add_option("--out-dir", reg_opt.out_dir, "Output directory");
  reg->add_option("--gt", reg_opt.gt, "Ground-truth cloud for metrics");
  reg->add_option("--pairs", reg_opt.pairs, "Correspondence file");
  reg->add_option("--config", reg_opt.config, "JSON config file (flags win)");
  reg->add_option("--epochs", reg_opt.cfg.epochs, "Training epochs");
  reg->add_option("--lr", reg_opt.cfg.lr, "Initial learning rate");
  reg->add_option("--sigma2", reg_opt.cfg.sigma2, "Kernel bandwidth sigma^2");
  reg->add_option("--k", reg_opt.cfg.k, "Neighbors for reconstruction weights");
  reg->add_option("--alpha1", reg_opt.cfg.alpha1, "Data term weight");
  reg->add_option("--alpha2", reg_opt.cfg.alpha2, "Regularizer weight");
  reg->add_option("--beta", reg_opt.beta, "Matching term weight");
  reg->add_option("--seed", reg_opt.cfg.seed, "Random seed");
  reg->add_option("--omega0", reg_opt.cfg.omega0, "Sine activation frequency");
  reg->add_option("--gram-eps", reg_opt.cfg.gram_eps,
                  "Gram regularization scale");
  reg->add_option("--kernel", reg_opt.kernel, "Kernel mode")
      ->check(CLI::IsMember({"per_coordinate", "euclidean"}));
  reg->add_option("--loss", reg_opt.loss, "Data term")
      ->check(CLI::IsMember({"mcc", "cd"}));

  EvaluateOptions eval_opt;
  CLI::App* eval = app.add_subcommand(
      "evaluate", "Score a prediction against an index-aligned ground truth");
  eval->add_option("--pred", eval_opt.pred, "Predicted cloud")->required();
  eval->add_option("--gt", eval_opt.gt, "Ground-truth cloud")->required();
  eval->add_flag("--raw", eval_opt.raw, "Skip gt-frame normalization");
  eval->add_option("--thresholds", eval_opt.thresholds,
                   "strict,relaxed,outlier override")
      ->delimiter(',');
  eval->add_option("--errors-csv", eval_opt.errors_csv,
                   "Write per-point errors to this CSV");

  PerturbOptions pert_opt;
  CLI::App* pert = app.add_subcommand(
      "perturb", "Apply occlusion, noise, and outliers to a cloud");
  pert->add_option("--in", pert_opt.in, "Input cloud")->required();
  pert->add_option("--out", pert_opt.out, "Output cloud")->required();
  pert->add_option("--occlude", pert_opt.occlude_fraction,
                   "Fraction to crop, [0,1)");
  pert->add_option("--noise", pert_opt.noise_pct,
                   "Gaussian noise, % of bbox diagonal");
  pert->add_option("--outliers", pert_opt.outliers, "Outlier count");
  pert->add_option("--outlier-ratio", pert_opt.outlier_ratio,
                   "Outlier count as a fraction of N (overrides --outliers)");
  pert->add_option("--seed", pert_opt.seed, "Random seed");
  pert->add_option("--seed-point", pert_opt.seed_point,
                   "Crop center index override");

  InterpolateOptions interp_opt;
  CLI::App* interp = app.add_subcommand(
      "interpolate", "Blend a source toward a trained deformation");
  interp->add_option("--source", interp_opt.source, "Source cloud")->required();
  interp->add_option("--checkpoint", interp_opt.checkpoint,
                     "Trained network checkpoint")
      ->required();
  interp->add_option("--target", interp_opt.target,
                     "Target cloud (for the output frame)");
  interp->add_option("--out-dir", interp_opt.out_dir, "Output directory")
      ->required();
  interp->add_option("--t-list", interp_opt.t_list, "Blend factors in [0,1]")
      ->required()
      ->delimiter(',');

  SweepOptions sweep_opt;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Cross-product ablation over loss, regularizer, and occlusion");
  sweep->add_option("--source", sweep_opt.source, "Source cloud")->required();
  sweep->add_option("--gt", sweep_opt.gt,
                    "Complete target cloud (index-aligned ground truth)")
      ->required();
  sweep->add_option("--out-dir", sweep_opt.out_dir, "Output directory")
      ->required();
  sweep->add_option("--occlusion-levels", sweep_opt.occlusion_levels,
                    "Occlusion fractions")
      ->delimiter(',');
  sweep->add_option("--losses", sweep_opt.losses, "Data terms to compare")
      ->delimiter(',');
  sweep->add_option("--regularizers", sweep_opt.regularizers,
                    "llr and/or none")
      ->delimiter(',');
  sweep->add_option("--jobs", sweep_opt.jobs, "Parallel runs");
  sweep->add_option("--epochs", sweep_opt.cfg.epochs, "Training epochs");
  sweep->add_option("--lr", sweep_opt.cfg.lr, "Initial learning rate");
  sweep->add_option("--sigma2", sweep_opt.cfg.sigma2, "Kernel bandwidth");
  sweep->add_option("--k", sweep_opt.cfg.k, "Reconstruction neighbors");
  sweep->add_option("--alpha1", sweep_opt.cfg.alpha1, "Data term weight");
  sweep->add_option("--alpha2", sweep_opt.cfg.alpha2, "Regularizer weight");
  sweep->add_option("--seed", sweep_opt.cfg.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << '\n';
    return kExitError;
  }

  try {
    if (*reg) return run_register(reg, reg_opt);
    if (*eval) return run_evaluate(eval_opt);
    if (*pert) return run_perturb(pert_opt);
    if (*interp) return run_interpolate(interp_opt);
    if (*sweep) return run_sweep(sweep_opt);
  } catch (const oar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
