// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Coordinate-based displacement network: three hidden layers of 128 neurons
// with sine activations, mapping a normalized 3D point to a 3D displacement.
// The deformed point is input + displacement. Backpropagation is hand-derived
// for this fixed architecture.

#ifndef OAR_NETWORK_HPP
#define OAR_NETWORK_HPP

#include <Eigen/Core>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "oar/errors.hpp"
#include "oar/point_cloud.hpp"
#include "oar/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace oar {

inline constexpr int kInputDim = 3;
inline constexpr int kHiddenWidth = 128;
inline constexpr int kOutputDim = 3;

struct NetworkParams {
  Eigen::MatrixXd w1{kHiddenWidth, kInputDim};
  Eigen::VectorXd b1{kHiddenWidth};
  Eigen::MatrixXd w2{kHiddenWidth, kHiddenWidth};
  Eigen::VectorXd b2{kHiddenWidth};
  Eigen::MatrixXd w3{kHiddenWidth, kHiddenWidth};
  Eigen::VectorXd b3{kHiddenWidth};
  Eigen::MatrixXd w4{kOutputDim, kHiddenWidth};
  Eigen::VectorXd b4{kOutputDim};
  double omega0 = 30.0;

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           b2.allFinite() && w3.allFinite() && b3.allFinite() &&
           w4.allFinite() && b4.allFinite();
  }
};

/// Parameter-shaped gradient container.
struct NetworkGrads {
  Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(kHiddenWidth, kInputDim);
  Eigen::VectorXd b1 = Eigen::VectorXd::Zero(kHiddenWidth);
  Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(kHiddenWidth, kHiddenWidth);
  Eigen::VectorXd b2 = Eigen::VectorXd::Zero(kHiddenWidth);
  Eigen::MatrixXd w3 = Eigen::MatrixXd::Zero(kHiddenWidth, kHiddenWidth);
  Eigen::VectorXd b3 = Eigen::VectorXd::Zero(kHiddenWidth);
  Eigen::MatrixXd w4 = Eigen::MatrixXd::Zero(kOutputDim, kHiddenWidth);
  Eigen::VectorXd b4 = Eigen::VectorXd::Zero(kOutputDim);

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           b2.allFinite() && w3.allFinite() && b3.allFinite() &&
           w4.allFinite() && b4.allFinite();
  }
};

/// Deterministic initialization: first layer uniform on [-1/fan_in, 1/fan_in],
/// deeper layers uniform on +-sqrt(6/fan_in)/omega0, biases zero.
inline NetworkParams init_network(std::uint64_t seed, double omega0 = 30.0) {
  if (!(omega0 > 0.0))
    throw InvalidArgumentError("omega0 must be positive");
  NetworkParams params;
  params.omega0 = omega0;
  Rng rng(seed);

  auto fill = [&](Eigen::MatrixXd& w, double bound) {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = rng.uniform(-bound, bound);
  };
  const double deep = std::sqrt(6.0 / kHiddenWidth) / omega0;
  fill(params.w1, 1.0 / kInputDim);
  fill(params.w2, deep);
  fill(params.w3, deep);
  fill(params.w4, deep);
  params.b1.setZero();
  params.b2.setZero();
  params.b3.setZero();
  params.b4.setZero();
  return params;
}

/// Intermediate activations kept for the backward pass.
struct ForwardRecord {
  Eigen::MatrixXd input;          // N x 3
  Eigen::MatrixXd z1, z2, z3;     // N x 128 pre-activations
  Eigen::MatrixXd h1, h2, h3;     // N x 128 sine outputs
};

struct ForwardResult {
  Eigen::MatrixXd displacement;  // N x 3
  ForwardRecord record;
};

/// Evaluate the displacement field on an N x 3 matrix of normalized points.
inline ForwardResult forward(const NetworkParams& params,
                             const Eigen::MatrixXd& points) {
  if (points.cols() != kInputDim)
    throw ShapeMismatchError("forward expects an N x 3 point matrix");
  const double w0 = params.omega0;
  ForwardResult out;
  ForwardRecord& rec = out.record;
  rec.input = points;
  rec.z1 = (points * params.w1.transpose()).rowwise() + params.b1.transpose();
  rec.h1 = (w0 * rec.z1).array().sin();
  rec.z2 = (rec.h1 * params.w2.transpose()).rowwise() + params.b2.transpose();
  rec.h2 = (w0 * rec.z2).array().sin();
  rec.z3 = (rec.h2 * params.w3.transpose()).rowwise() + params.b3.transpose();
  rec.h3 = (w0 * rec.z3).array().sin();
  out.displacement =
      (rec.h3 * params.w4.transpose()).rowwise() + params.b4.transpose();
  return out;
}

inline ForwardResult forward(const NetworkParams& params,
                             const PointCloud& cloud) {
  if (cloud.frame != Frame::normalized)
    throw InvalidArgumentError("forward expects a normalized-frame cloud");
  return forward(params, cloud_to_matrix(cloud));
}

/// Exact reverse-mode gradient of a scalar loss given its gradient with
/// respect to the displacements. Gradients with respect to deformed points
/// coincide (deformed = input + displacement, input fixed), so callers
/// accumulate both into `grad_displacement` before calling.
inline NetworkGrads backward(const NetworkParams& params,
                             const ForwardRecord& rec,
                             const Eigen::MatrixXd& grad_displacement) {
  if (grad_displacement.rows() != rec.input.rows() ||
      grad_displacement.cols() != kOutputDim)
    throw ShapeMismatchError("upstream gradient shape does not match record");
  const double w0 = params.omega0;
  NetworkGrads g;

  g.w4 = grad_displacement.transpose() * rec.h3;
  g.b4 = grad_displacement.colwise().sum();

  Eigen::MatrixXd gh = grad_displacement * params.w4;  // N x 128
  Eigen::MatrixXd gz =
      gh.array() * (w0 * (w0 * rec.z3).array().cos());
  g.w3 = gz.transpose() * rec.h2;
  g.b3 = gz.colwise().sum();

  gh = gz * params.w3;
  gz = gh.array() * (w0 * (w0 * rec.z2).array().cos());
  g.w2 = gz.transpose() * rec.h1;
  g.b2 = gz.colwise().sum();

  gh = gz * params.w2;
  gz = gh.array() * (w0 * (w0 * rec.z1).array().cos());
  g.w1 = gz.transpose() * rec.input;
  g.b1 = gz.colwise().sum();
  return g;
}

// --- checkpoint serialization -----------------------------------------------
//
// Flat little-endian fp64 blob with a 16-byte header:
//   bytes 0..3   magic "OARN"
//   bytes 4..7   version (u32)
//   bytes 8..15  omega0 (fp64)
// followed by w1,b1,w2,b2,w3,b3,w4,b4 in row-major order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void append_matrix(std::vector<std::uint8_t>& buf,
                          const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
      buf.insert(buf.end(), p, p + sizeof v);
    }
}

inline void read_matrix(const std::vector<std::uint8_t>& buf, std::size_t& pos,
                        Eigen::Ref<Eigen::MatrixXd> m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (pos + sizeof(double) > buf.size())
        throw CheckpointError("checkpoint truncated");
      double v = 0.0;
      std::memcpy(&v, buf.data() + pos, sizeof v);
      pos += sizeof v;
      m(r, c) = v;
    }
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_params(const NetworkParams& params) {
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + sizeof(double) * (128 * 3 + 128 + 2 * (128 * 128 + 128) +
                                     3 * 128 + 3));
  const char magic[4] = {'O', 'A', 'R', 'N'};
  buf.insert(buf.end(), magic, magic + 4);
  const std::uint32_t version = kCheckpointVersion;
  const auto* vp = reinterpret_cast<const std::uint8_t*>(&version);
  buf.insert(buf.end(), vp, vp + sizeof version);
  const auto* op = reinterpret_cast<const std::uint8_t*>(&params.omega0);
  buf.insert(buf.end(), op, op + sizeof params.omega0);
  detail::append_matrix(buf, params.w1);
  detail::append_matrix(buf, params.b1);
  detail::append_matrix(buf, params.w2);
  detail::append_matrix(buf, params.b2);
  detail::append_matrix(buf, params.w3);
  detail::append_matrix(buf, params.b3);
  detail::append_matrix(buf, params.w4);
  detail::append_matrix(buf, params.b4);
  return buf;
}

inline NetworkParams deserialize_params(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 16) throw CheckpointError("checkpoint too short");
  if (std::memcmp(buf.data(), "OARN", 4) != 0)
    throw CheckpointError("bad checkpoint magic");
  std::uint32_t version = 0;
  std::memcpy(&version, buf.data() + 4, sizeof version);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  NetworkParams params;
  std::memcpy(&params.omega0, buf.data() + 8, sizeof params.omega0);
  std::size_t pos = 16;
  detail::read_matrix(buf, pos, params.w1);
  detail::read_matrix(buf, pos, params.b1);
  detail::read_matrix(buf, pos, params.w2);
  detail::read_matrix(buf, pos, params.b2);
  detail::read_matrix(buf, pos, params.w3);
  detail::read_matrix(buf, pos, params.b3);
  detail::read_matrix(buf, pos, params.w4);
  detail::read_matrix(buf, pos, params.b4);
  if (pos != buf.size()) throw CheckpointError("trailing bytes in checkpoint");
  return params;
}

inline void save_params(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto buf = serialize_params(params);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline NetworkParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError(path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return deserialize_params(buf);
}

}  // namespace oar

#endif  // OAR_NETWORK_HPP
