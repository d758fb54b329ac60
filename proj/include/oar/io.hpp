// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Text point cloud readers/writers: XYZ triples, OBJ vertex lines, and
// ASCII PLY with x/y/z float properties. Writers emit 9 significant digits.

#ifndef OAR_IO_HPP
#define OAR_IO_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oar/errors.hpp"
#include "oar/point_cloud.hpp"

namespace oar {

enum class CloudFormat { ply_ascii, obj, xyz };

/// Pick a format from a file extension (.ply/.obj/.xyz, case-insensitive).
inline std::optional<CloudFormat> format_from_extension(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return CloudFormat::ply_ascii;
  if (ext == ".obj") return CloudFormat::obj;
  if (ext == ".xyz") return CloudFormat::xyz;
  return std::nullopt;
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

inline double parse_coord(const std::string& tok, std::size_t line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + tok + "'", line_no);
  }
  if (pos != tok.size())
    throw ParseError("trailing characters in number: '" + tok + "'", line_no);
  if (!std::isfinite(v))
    throw ParseError("non-finite coordinate: '" + tok + "'", line_no);
  return v;
}

inline bool is_float_type(const std::string& t) {
  return t == "float" || t == "double" || t == "float32" || t == "float64";
}

inline PointCloud load_xyz(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 3)
      throw ParseError("expected 3 coordinates, got " +
                           std::to_string(tokens.size()),
                       line_no);
    cloud.points.emplace_back(parse_coord(tokens[0], line_no),
                              parse_coord(tokens[1], line_no),
                              parse_coord(tokens[2], line_no));
  }
  if (cloud.empty()) throw EmptyCloudError();
  return cloud;
}

inline PointCloud load_obj(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0] != "v") continue;  // vertex lines only
    // "v x y z" with an optional trailing w.
    if (tokens.size() != 4 && tokens.size() != 5)
      throw ParseError("malformed vertex line", line_no);
    cloud.points.emplace_back(parse_coord(tokens[1], line_no),
                              parse_coord(tokens[2], line_no),
                              parse_coord(tokens[3], line_no));
  }
  if (cloud.empty()) throw EmptyCloudError();
  return cloud;
}

inline PointCloud load_ply_ascii(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&](const char* what) -> std::string {
    if (!std::getline(in, line))
      throw ParseError(std::string("unexpected end of file while reading ") + what,
                       line_no + 1);
    ++line_no;
    return line;
  };

  if (split_ws(next_line("magic")) != std::vector<std::string>{"ply"})
    throw ParseError("missing 'ply' magic", line_no);

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> scalar_properties;  // empty name marks a list
  };
  std::vector<Element> elements;
  bool format_seen = false;

  while (true) {
    auto tokens = split_ws(next_line("header"));
    if (tokens.empty()) continue;
    if (tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw ParseError("malformed format line", line_no);
      if (tokens[1] != "ascii")
        throw ParseError("binary PLY is not supported", line_no);
      format_seen = true;
      continue;
    }
    if (tokens[0] == "element") {
      if (tokens.size() != 3) throw ParseError("malformed element line", line_no);
      Element e;
      e.name = tokens[1];
      try {
        e.count = std::stoull(tokens[2]);
      } catch (const std::exception&) {
        throw ParseError("bad element count '" + tokens[2] + "'", line_no);
      }
      elements.push_back(std::move(e));
      continue;
    }
    if (tokens[0] == "property") {
      if (elements.empty())
        throw ParseError("property before any element", line_no);
      if (tokens.size() >= 2 && tokens[1] == "list") {
        elements.back().scalar_properties.emplace_back();  // placeholder
      } else if (tokens.size() == 3) {
        if ((tokens[2] == "x" || tokens[2] == "y" || tokens[2] == "z") &&
            elements.back().name == "vertex" && !is_float_type(tokens[1]))
          throw ParseError("vertex position must be a float property", line_no);
        elements.back().scalar_properties.push_back(tokens[2]);
      } else {
        throw ParseError("malformed property line", line_no);
      }
      continue;
    }
    if (tokens[0] == "end_header") break;
    throw ParseError("unrecognized header line '" + tokens[0] + "'", line_no);
  }
  if (!format_seen) throw ParseError("missing format line", line_no);

  const auto vertex_it =
      std::find_if(elements.begin(), elements.end(),
                   [](const Element& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end())
    throw ParseError("no vertex element declared", line_no);
  if (vertex_it->count == 0) throw EmptyCloudError();

  auto index_of = [&](const char* prop) -> std::size_t {
    const auto& props = vertex_it->scalar_properties;
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == prop) return i;
    throw ParseError(std::string("vertex element lacks property ") + prop,
                     line_no);
  };
  const std::size_t ix = index_of("x");
  const std::size_t iy = index_of("y");
  const std::size_t iz = index_of("z");

  PointCloud cloud;
  cloud.points.reserve(vertex_it->count);
  for (const auto& element : elements) {
    if (&element == &*vertex_it) {
      for (std::size_t i = 0; i < element.count; ++i) {
        auto tokens = split_ws(next_line("vertex data"));
        if (tokens.size() < element.scalar_properties.size())
          throw ParseError("vertex line has too few values", line_no);
        cloud.points.emplace_back(parse_coord(tokens[ix], line_no),
                                  parse_coord(tokens[iy], line_no),
                                  parse_coord(tokens[iz], line_no));
      }
    } else {
      for (std::size_t i = 0; i < element.count; ++i) next_line("element data");
    }
  }
  return cloud;
}

inline void format_point(char* buf, std::size_t n, const Vec3& p,
                         const char* fmt) {
  std::snprintf(buf, n, fmt, p.x(), p.y(), p.z());
}

}  // namespace detail

inline PointCloud load_cloud(const std::string& path, CloudFormat format) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  PointCloud cloud;
  switch (format) {
    case CloudFormat::xyz:
      cloud = detail::load_xyz(in);
      break;
    case CloudFormat::obj:
      cloud = detail::load_obj(in);
      break;
    case CloudFormat::ply_ascii:
      cloud = detail::load_ply_ascii(in);
      break;
  }
  cloud.frame = Frame::original;
  return cloud;
}

/// Load using the format implied by the file extension.
inline PointCloud load_cloud(const std::string& path) {
  auto fmt = format_from_extension(path);
  if (!fmt)
    throw InvalidArgumentError("cannot infer cloud format from path: " + path);
  return load_cloud(path, *fmt);
}

inline void save_cloud(const PointCloud& cloud, const std::string& path,
                       CloudFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[128];
  switch (format) {
    case CloudFormat::xyz:
      for (const Vec3& p : cloud.points) {
        detail::format_point(buf, sizeof buf, p, "%.9g %.9g %.9g\n");
        out << buf;
      }
      break;
    case CloudFormat::obj:
      for (const Vec3& p : cloud.points) {
        detail::format_point(buf, sizeof buf, p, "v %.9g %.9g %.9g\n");
        out << buf;
      }
      break;
    case CloudFormat::ply_ascii:
      out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
          << "\nproperty double x\nproperty double y\nproperty double z\n"
             "end_header\n";
      for (const Vec3& p : cloud.points) {
        detail::format_point(buf, sizeof buf, p, "%.9g %.9g %.9g\n");
        out << buf;
      }
      break;
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void save_cloud(const PointCloud& cloud, const std::string& path) {
  auto fmt = format_from_extension(path);
  if (!fmt)
    throw InvalidArgumentError("cannot infer cloud format from path: " + path);
  save_cloud(cloud, path, *fmt);
}

/// One externally supplied correspondence: a source index paired with either
/// a target index (resolved later against the target cloud) or an explicit
/// target position.
struct CorrespondenceSpec {
  int source_index = -1;
  int target_index = -1;  // -1 when an explicit point is given
  Vec3 target_point = Vec3::Zero();
};

/// Parse a correspondence file. Each non-empty line is either
/// "s_idx t_idx" or "s_idx x y z" (0-based indices).
inline std::vector<CorrespondenceSpec> load_correspondences(
    const std::string& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<CorrespondenceSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    CorrespondenceSpec spec;
    try {
      spec.source_index = std::stoi(tokens[0]);
    } catch (const std::exception&) {
      throw ParseError("bad source index '" + tokens[0] + "'", line_no);
    }
    if (tokens.size() == 2) {
      try {
        spec.target_index = std::stoi(tokens[1]);
      } catch (const std::exception&) {
        throw ParseError("bad target index '" + tokens[1] + "'", line_no);
      }
    } else if (tokens.size() == 4) {
      spec.target_point = Vec3(detail::parse_coord(tokens[1], line_no),
                               detail::parse_coord(tokens[2], line_no),
                               detail::parse_coord(tokens[3], line_no));
    } else {
      throw ParseError("expected 's t' or 's x y z'", line_no);
    }
    specs.push_back(spec);
  }
  return specs;
}

}  // namespace oar

#endif  // OAR_IO_HPP
