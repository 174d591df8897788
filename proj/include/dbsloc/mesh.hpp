#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dbsloc/trajectory.hpp"

namespace dbs {

using Rgb = std::array<std::uint8_t, 3>;

struct Mesh {
  std::vector<Point3> vertices;
  std::vector<Rgb> colors;  ///< one per vertex
  std::vector<std::array<std::int32_t, 3>> faces;

  bool operator==(const Mesh&) const = default;
};

/// Unit icosphere: the icosahedron with each face split `subdivisions` times,
/// vertices projected onto the sphere. Two subdivisions give 162 vertices and
/// 320 faces.
Mesh icosphere(int subdivisions, const Rgb& color = {255, 255, 255});

/// One icosphere (2 subdivisions) of the given radius per trajectory point.
Mesh trajectory_to_mesh(const Trajectory& t, double sphere_radius, const Rgb& color);

/// Concatenates meshes, offsetting face indices.
Mesh merge(const std::vector<Mesh>& parts);

/// ASCII PLY 1.0: vertex (x y z red green blue), face (vertex_indices).
void write_ply(const Mesh& mesh, const std::filesystem::path& path);
Mesh read_ply(const std::filesystem::path& path);

}  // namespace dbs
