#include "dbsloc/mesh.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "dbsloc/error.hpp"

namespace dbs {

namespace {

std::string format_coord(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v == 0.0 ? 0.0 : v);
  return {buf, r.ptr};
}

}  // namespace

Mesh icosphere(int subdivisions, const Rgb& color) {
  if (subdivisions < 0) throw Error(ErrorKind::InvalidArgument, "subdivisions must be >= 0");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoints;
    auto midpoint = [&](std::int32_t a, std::int32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const Point3 p = (m.vertices[static_cast<std::size_t>(a)] + m.vertices[static_cast<std::size_t>(b)]).normalized();
      const auto idx = static_cast<std::int32_t>(m.vertices.size());
      m.vertices.push_back(p);
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::int32_t, 3>> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& [a, b, c] : m.faces) {
      const std::int32_t ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      faces.push_back({a, ab, ca});
      faces.push_back({b, bc, ab});
      faces.push_back({c, ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  m.colors.assign(m.vertices.size(), color);
  return m;
}

Mesh trajectory_to_mesh(const Trajectory& t, double sphere_radius, const Rgb& color) {
  t.validate();
  if (!(sphere_radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "sphere radius must be positive");
  const Mesh unit = icosphere(2, color);
  Mesh out;
  out.vertices.reserve(unit.vertices.size() * t.points.size());
  out.faces.reserve(unit.faces.size() * t.points.size());
  for (const auto& p : t.points) {
    const auto base = static_cast<std::int32_t>(out.vertices.size());
    for (const auto& v : unit.vertices) out.vertices.push_back(p + sphere_radius * v);
    for (const auto& [a, b, c] : unit.faces) out.faces.push_back({a + base, b + base, c + base});
  }
  out.colors.assign(out.vertices.size(), color);
  return out;
}

Mesh merge(const std::vector<Mesh>& parts) {
  Mesh out;
  for (const auto& p : parts) {
    const auto base = static_cast<std::int32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
    out.colors.insert(out.colors.end(), p.colors.begin(), p.colors.end());
    for (const auto& [a, b, c] : p.faces) out.faces.push_back({a + base, b + base, c + base});
  }
  return out;
}

void write_ply(const Mesh& mesh, const std::filesystem::path& path) {
  if (mesh.colors.size() != mesh.vertices.size()) {
    throw Error(ErrorKind::InvalidArgument, "mesh needs one color per vertex");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\ncomment dbsloc trajectory mesh\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const auto& c = mesh.colors[i];
    out << format_coord(v.x()) << ' ' << format_coord(v.y()) << ' ' << format_coord(v.z()) << ' ' << int{c[0]} << ' '
        << int{c[1]} << ' ' << int{c[2]} << '\n';
  }
  for (const auto& [a, b, c] : mesh.faces) out << "3 " << a << ' ' << b << ' ' << c << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Mesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  auto bad = [&](const std::string& what) { return Error(ErrorKind::Format, path.string() + ": " + what); };
  if (!std::getline(in, line) || line != "ply") throw bad("missing ply magic");
  if (!std::getline(in, line) || line != "format ascii 1.0") throw bad("only ascii 1.0 is supported");
  std::size_t nv = 0, nf = 0;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ls(line);
    std::string word, kind;
    ls >> word;
    if (word == "element") {
      std::size_t count = 0;
      ls >> kind >> count;
      if (!ls) throw bad("malformed element line");
      if (kind == "vertex") nv = count;
      else if (kind == "face") nf = count;
    }
  }
  if (line != "end_header") throw bad("missing end_header");
  Mesh m;
  m.vertices.reserve(nv);
  m.colors.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    double x, y, z;
    int r, g, b;
    if (!(in >> x >> y >> z >> r >> g >> b)) throw bad("truncated vertex list");
    m.vertices.emplace_back(x, y, z);
    m.colors.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
  }
  for (std::size_t i = 0; i < nf; ++i) {
    int n;
    std::int32_t a, b, c;
    if (!(in >> n >> a >> b >> c) || n != 3) throw bad("truncated or non-triangle face");
    for (const auto idx : {a, b, c}) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= nv) throw bad("face index out of range");
    }
    m.faces.push_back({a, b, c});
  }
  return m;
}

}  // namespace dbs
