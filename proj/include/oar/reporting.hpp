// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// File emitters shared by the CLI and the test harness: loss history CSV,
// displacement table CSV, metrics JSON, and run manifests. Numeric output is
// deterministic so reruns with the same seed produce identical bytes.

#ifndef OAR_REPORTING_HPP
#define OAR_REPORTING_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oar/errors.hpp"
#include "oar/evaluation.hpp"
#include "oar/registration.hpp"

namespace oar {

/// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// FNV-1a 64-bit content hash, hex-encoded; used to fingerprint input files
/// in run manifests.
inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError(path);
  std::uint64_t h = 1469598103934665603ull;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 1099511628211ull;
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void save_loss_csv(const RegistrationResult& result,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "epoch,total,mcc,llr,match,lr\n";
  for (const EpochRecord& r : result.history)
    out << r.epoch << ',' << format_double(r.total) << ','
        << format_double(r.data) << ',' << format_double(r.llr) << ','
        << format_double(r.match) << ',' << format_double(r.lr) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline void save_displacement_csv(const RegistrationResult& result,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "x,y,z,nx,ny,nz\n";
  const auto& field = result.source_normalized;
  const auto& nu = result.displacement;
  for (Eigen::Index i = 0; i < field.rows(); ++i)
    out << format_double(field(i, 0)) << ',' << format_double(field(i, 1))
        << ',' << format_double(field(i, 2)) << ','
        << format_double(nu(i, 0)) << ',' << format_double(nu(i, 1)) << ','
        << format_double(nu(i, 2)) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"epe", m.epe},
          {"epe_mean_norm", m.epe_mean_norm},
          {"acc_strict", m.acc_strict},
          {"acc_relaxed", m.acc_relaxed},
          {"outlier", m.outlier},
          {"thresholds",
           {{"acc_strict", m.thresholds.acc_strict},
            {"acc_relaxed", m.thresholds.acc_relaxed},
            {"outlier", m.thresholds.outlier}}}};
}

inline void save_metrics_json(const Metrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << metrics_to_json(m).dump(2) << '\n';
}

inline void save_per_point_errors_csv(const Metrics& m,
                                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "index,error\n";
  for (std::size_t i = 0; i < m.per_point_errors.size(); ++i)
    out << i << ',' << format_double(m.per_point_errors[i]) << '\n';
}

inline nlohmann::json transform_to_json(const NormalizationTransform& tf) {
  return {{"mu", {tf.mu.x(), tf.mu.y(), tf.mu.z()}}, {"sigma", tf.sigma}};
}

inline nlohmann::json config_to_json(const RegistrationConfig& cfg,
                                     bool has_pairs) {
  return {{"epochs", cfg.epochs},
          {"lr", cfg.lr},
          {"sigma2", cfg.sigma2},
          {"k", cfg.k},
          {"alpha1", cfg.alpha1},
          {"alpha2", cfg.alpha2},
          {"beta", cfg.resolved_beta(has_pairs)},
          {"seed", cfg.seed},
          {"omega0", cfg.omega0},
          {"kernel", cfg.kernel_mode == KernelConfig::Mode::per_coordinate
                         ? "per_coordinate"
                         : "euclidean"},
          {"loss", cfg.data_term == DataTerm::mcc ? "mcc" : "cd"},
          {"gram_eps", cfg.gram_eps},
          {"scheduler",
           {{"factor", cfg.scheduler_factor},
            {"patience", cfg.scheduler_patience},
            {"rel_threshold", cfg.scheduler_rel_threshold},
            {"min_lr", cfg.scheduler_min_lr}}}};
}

}  // namespace oar

#endif  // OAR_REPORTING_HPP
