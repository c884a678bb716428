#include "gaussrt/convert.h"

#include <Eigen/Dense>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "gaussrt/special.h"

namespace gaussrt {

// -----------------------------------------------------------------------------
// MESH SAMPLING
// -----------------------------------------------------------------------------

static vec3 face_normal(const MeshAsset& mesh, int f) {
  auto& t = mesh.triangles[f];
  return cross(mesh.positions[t[1]] - mesh.positions[t[0]],
      mesh.positions[t[2]] - mesh.positions[t[0]]);
}

double surface_area(const MeshAsset& mesh) {
  double area = 0;
  for (int f = 0; f < int(mesh.triangles.size()); f++)
    area += 0.5 * length(face_normal(mesh, f));
  return area;
}

namespace {

struct SurfacePoint {
  vec3 position;
  vec3 normal;
  int  face = -1;
};

struct MeshSampler {
  const MeshAsset&    mesh;
  std::vector<double> cdf;

  explicit MeshSampler(const MeshAsset& m) : mesh(m) {
    double sum = 0;
    for (int f = 0; f < int(mesh.triangles.size()); f++) {
      sum += 0.5 * length(face_normal(mesh, f));
      cdf.push_back(sum);
    }
  }

  SurfacePoint sample(Rng& rng) const {
    auto target = rng.uniform() * cdf.back();
    auto f      = int(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    f           = std::min(f, int(cdf.size()) - 1);
    auto u      = rng.uniform2();
    auto su     = std::sqrt(u.x);
    auto b0 = 1 - su, b1 = u.y * su, b2 = 1 - b0 - b1;
    auto& t = mesh.triangles[f];
    SurfacePoint p;
    p.face     = f;
    p.position = mesh.positions[t[0]] * b0 + mesh.positions[t[1]] * b1 +
                 mesh.positions[t[2]] * b2;
    auto ng = normalize(face_normal(mesh, f));
    if (mesh.normals.size() == mesh.positions.size()) {
      auto ns  = normalize(mesh.normals[t[0]] * b0 + mesh.normals[t[1]] * b1 +
                          mesh.normals[t[2]] * b2);
      p.normal = length(ns) > 0 ? ns : ng;
    } else {
      p.normal = ng;
    }
    return p;
  }
};

// Uniform surface samples in a spatial hash, answering nearest-point queries.
struct PointBank {
  std::vector<SurfacePoint>                    points;
  std::unordered_map<uint64_t, std::vector<int>> cells;
  double                                       cell = 1;
  int                                          max_ring = 1;

  PointBank(const MeshAsset& mesh, int count, Rng& rng) {
    MeshSampler sampler(mesh);
    auto        area = sampler.cdf.back();
    cell             = 2 * std::sqrt(area / count);
    bbox3 bounds;
    points.reserve(count);
    for (int i = 0; i < count; i++) {
      points.push_back(sampler.sample(rng));
      bounds = merge(bounds, {points.back().position, points.back().position});
      cells[key(coord(points.back().position))].push_back(i);
    }
    max_ring = int(std::ceil(length(bounds.diagonal()) / cell)) + 2;
  }

  std::array<int64_t, 3> coord(const vec3& p) const {
    return {int64_t(std::floor(p.x / cell)), int64_t(std::floor(p.y / cell)),
        int64_t(std::floor(p.z / cell))};
  }
  static uint64_t key(const std::array<int64_t, 3>& c) {
    return hash_combine(hash_combine(hash64(uint64_t(c[0])), uint64_t(c[1])),
        uint64_t(c[2]));
  }

  const SurfacePoint& nearest(const vec3& p, double& dist) const {
    auto c    = coord(p);
    int  best = -1;
    auto best_d2 = inf;
    auto visit = [&](int64_t x, int64_t y, int64_t z) {
      auto it = cells.find(key({x, y, z}));
      if (it == cells.end()) return;
      for (auto i : it->second) {
        auto d  = points[i].position - p;
        auto d2 = dot(d, d);
        if (d2 < best_d2) best_d2 = d2, best = i;
      }
    };
    for (int r = 0; r <= max_ring; r++) {
      for (int64_t dx = -r; dx <= r; dx++)
        for (int64_t dy = -r; dy <= r; dy++) {
          if (std::max(std::abs(dx), std::abs(dy)) == r) {
            for (int64_t dz = -r; dz <= r; dz++)
              visit(c[0] + dx, c[1] + dy, c[2] + dz);
          } else {
            visit(c[0] + dx, c[1] + dy, c[2] - r);
            if (r > 0) visit(c[0] + dx, c[1] + dy, c[2] + r);
          }
        }
      // anything in later rings is at least r cells away
      if (best >= 0 && std::sqrt(best_d2) <= r * cell) break;
    }
    dist = std::sqrt(best_d2);
    return points[best];
  }
};

vec2 gaussian_pair(Rng& rng) {
  auto u = rng.uniform2();
  auto r = std::sqrt(-2 * std::log1p(-u.x));
  return {r * std::cos(2 * pi * u.y), r * std::sin(2 * pi * u.y)};
}

// BSDF parameters flattened for outlier tests; emission is scaled by the
// largest emission of the mesh so every entry lies in [0, 1].
std::vector<double> parameter_vector(const BaseBsdf& b, double emission_scale) {
  return {b.base_color.x, b.base_color.y, b.base_color.z, b.roughness,
      b.metallic, b.specular, b.retro, b.emission.x / emission_scale,
      b.emission.y / emission_scale, b.emission.z / emission_scale};
}

// Weighted average over material indices. A single material is copied
// exactly.
BaseBsdf average_bsdf(const std::map<int, int>& counts, const MeshAsset& mesh) {
  if (counts.size() == 1) return mesh.materials[counts.begin()->first];
  BaseBsdf out;
  out.base_color = {};
  out.roughness = out.metallic = out.specular = out.retro = 0;
  out.emission = {};
  double total = 0;
  for (auto [m, n] : counts) total += n;
  for (auto [m, n] : counts) {
    auto& b = mesh.materials[m];
    auto  w = n / total;
    out.base_color += b.base_color * w;
    out.roughness += b.roughness * w;
    out.metallic += b.metallic * w;
    out.specular += b.specular * w;
    out.retro += b.retro * w;
    out.emission += b.emission * w;
  }
  return out;
}

int face_material(const MeshAsset& mesh, int face) {
  if (face < int(mesh.face_material.size())) return mesh.face_material[face];
  return 0;
}

void check_mesh(const MeshAsset& mesh) {
  if (mesh.triangles.empty()) throw std::invalid_argument("empty mesh");
  if (!(surface_area(mesh) > 0)) throw std::invalid_argument("zero-area mesh");
  if (mesh.materials.empty())
    throw std::invalid_argument("mesh has no materials");
}

// Deduplicates materials by exact value.
struct MaterialTable {
  std::vector<Material>             materials;
  std::map<std::vector<double>, int> index;

  int add(const Material& m) {
    auto& b = m.bsdf;
    std::vector<double> k = {b.base_color.x, b.base_color.y, b.base_color.z,
        b.roughness, b.metallic, b.specular, b.retro, b.emission.x, b.emission.y,
        b.emission.z, m.ndf.frame.w, m.ndf.frame.x, m.ndf.frame.y,
        m.ndf.frame.z, m.ndf.eigenvalues.x, m.ndf.eigenvalues.y,
        m.ndf.eigenvalues.z};
    auto [it, inserted] = index.emplace(k, int(materials.size()));
    if (inserted) materials.push_back(m);
    return it->second;
  }
};

}  // namespace

// -----------------------------------------------------------------------------
// MESH CONVERSION
// -----------------------------------------------------------------------------

double mesh_initial_scale_squared(double area, int count, double k, double cutoff) {
  return cutoff * k * area / count;
}

double mesh_initial_scale(double area, int count, double k, double cutoff) {
  return std::sqrt(mesh_initial_scale_squared(area, count, k, cutoff));
}

ConvertedScene mesh_to_gaussians(const MeshAsset& mesh, const MeshConvertConfig& config) {
  check_mesh(mesh);
  if (config.count < 1) throw std::invalid_argument("count must be positive");

  auto area  = surface_area(mesh);
  auto s0    = mesh_initial_scale(area, config.count, config.k, config.cutoff);
  auto kc    = std::sqrt(cutoff_radius2(config.cutoff));
  auto thr   = config.thresholds;
  if (!(thr.eps_d > 0)) thr.eps_d = 2 * s0;

  double emission_scale = 1e-12;
  for (auto& m : mesh.materials)
    emission_scale = std::max(emission_scale, max_component(m.emission));

  auto        rng = make_rng(config.seed, 7);
  auto        bank_rng = make_rng(config.seed, 11);
  PointBank   bank(mesh, config.bank_size, bank_rng);
  MeshSampler sampler(mesh);

  ConvertedScene out;
  MaterialTable  table;
  std::vector<vec3> accepted_normals;
  for (int i = 0; i < config.count; i++) {
    auto center = sampler.sample(rng);
    auto n      = center.normal;
    auto frame  = basis_fromz(n);
    auto mat_mu = face_material(mesh, center.face);
    auto phi_mu = parameter_vector(mesh.materials[mat_mu], emission_scale);

    std::map<int, int> counts;
    accepted_normals.clear();
    std::vector<vec3> outliers;
    for (int j = 0; j < config.samples_per_prim; j++) {
      auto g = gaussian_pair(rng);
      auto p = center.position + (frame.x * g.x + frame.y * g.y) * s0;
      double d;
      auto& q   = bank.nearest(p, d);
      auto  mat = face_material(mesh, q.face);
      auto  phi = parameter_vector(mesh.materials[mat], emission_scale);
      auto  outlier = dot(q.normal, n) < 1 - thr.eps_n || d > thr.eps_d;
      for (size_t k = 0; k < phi.size() && !outlier; k++)
        outlier = std::abs(phi[k] - phi_mu[k]) > thr.eps_k;
      if (outlier) {
        outliers.push_back(p - center.position);
      } else {
        counts[mat]++;
        accepted_normals.push_back(q.normal);
      }
    }

    auto sx = s0, sy = s0;
    auto rx = frame.x;
    if (!outliers.empty()) {
      auto closest = *std::min_element(outliers.begin(), outliers.end(),
          [](auto& a, auto& b) { return dot(a, a) < dot(b, b); });
      auto dmin = length(closest);
      if (dmin > 0) rx = normalize(closest - n * dot(closest, n));
      sx = std::min(s0, dmin / kc);
    }
    auto ry = cross(n, rx);
    for (auto& o : outliers) {
      auto a = dot(o, rx), b = dot(o, ry);
      auto r = a / (kc * sx);
      if (std::abs(r) < 1) sy = std::min(sy, std::abs(b) / (kc * std::sqrt(1 - r * r)));
    }
    sx = std::max(sx, 1e-3 * s0);
    sy = std::max(sy, 1e-3 * s0);

    GaussianPrimitive prim;
    prim.mu        = center.position;
    prim.rot       = from_matrix(from_columns(rx, ry, n));
    prim.scales    = {sx, sy, 0.1 * std::min(sx, sy)};
    prim.magnitude = 4 * pi * sx * sy;

    Material material;
    if (counts.empty()) counts[mat_mu] = 1;
    material.bsdf = average_bsdf(counts, mesh);
    material.ndf  = accepted_normals.size() >= 16 ? fit_sggx(accepted_normals)
                                                  : sggx_surface(n);
    prim.material_id = table.add(material);
    out.primitives.push_back(prim);
  }
  out.materials = std::move(table.materials);
  return out;
}

std::vector<Material> attach_appearance(std::span<GaussianPrimitive> prims,
    const MeshAsset& source, int samples_per_prim, uint64_t seed, int bank_size) {
  check_mesh(source);
  auto          bank_rng = make_rng(seed, 11);
  PointBank     bank(source, bank_size, bank_rng);
  auto          rng = make_rng(seed, 13);
  MaterialTable table;
  for (auto& g : prims) {
    auto rot = to_matrix(g.rot);
    std::map<int, int> counts;
    std::vector<vec3>  normals;
    for (int j = 0; j < samples_per_prim; j++) {
      auto a = gaussian_pair(rng), b = gaussian_pair(rng);
      auto p = g.mu + rot * (g.scales * vec3{a.x, a.y, b.x});
      double d;
      auto& q = bank.nearest(p, d);
      counts[face_material(source, q.face)]++;
      normals.push_back(q.normal);
    }
    Material m;
    m.bsdf        = average_bsdf(counts, source);
    m.ndf         = normals.size() >= 16 ? fit_sggx(normals) : sggx_isotropic();
    g.material_id = table.add(m);
  }
  return table.materials;
}

// -----------------------------------------------------------------------------
// SGGX FITTING
// -----------------------------------------------------------------------------

SggxNdf fit_sggx(std::span<const vec3> normal_samples) {
  if (normal_samples.size() < 16)
    throw std::invalid_argument("fit_sggx needs at least 16 samples");
  Eigen::Matrix3d moment = Eigen::Matrix3d::Zero();
  size_t          used   = 0;
  for (auto& n : normal_samples) {
    auto l = length(n);
    if (!(l > 0)) continue;
    Eigen::Vector3d v(n.x / l, n.y / l, n.z / l);
    moment += v * v.transpose();
    used++;
  }
  if (used == 0) throw std::invalid_argument("fit_sggx: all samples are zero");
  moment /= double(used);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(moment);
  Eigen::Matrix3d axes = solver.eigenvectors();
  if (axes.determinant() < 0) axes.col(0) = -axes.col(0);

  vec3 sigma;
  for (int i = 0; i < 3; i++) {
    double sum = 0;
    for (auto& n : normal_samples) {
      auto l = length(n);
      if (l > 0) sum += std::abs(axes(0, i) * n.x + axes(1, i) * n.y + axes(2, i) * n.z) / l;
    }
    sigma[i] = sum / double(used);
  }
  auto ev  = sigma * sigma;
  auto top = max_component(ev);
  ev       = max(ev / top, vec3{1e-6, 1e-6, 1e-6});

  mat3 r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) r[i][j] = axes(i, j);
  return {from_matrix(r), ev};
}

// -----------------------------------------------------------------------------
// SPLATS
// -----------------------------------------------------------------------------

double remap_splat_magnitude(const Splat& splat, const vec3& view_dir) {
  if (!(splat.opacity > 0)) return 0;
  auto cov   = rotate_diagonal(to_matrix(splat.rot), splat.scales * splat.scales);
  auto frame = basis_fromz(normalize(view_dir));
  auto a = quadratic_form(cov, frame.x), c = quadratic_form(cov, frame.y);
  auto b   = dot(frame.x, cov * frame.y);
  auto det = std::max(a * c - b * b, 1e-12);
  return 2 * pi * std::sqrt(det) * splat.opacity;
}

SggxNdf ellipsoid_ndf(const vec3& scales, const quat& rot) {
  vec3 ev = {scales.y * scales.z, scales.x * scales.z, scales.x * scales.y};
  ev      = ev * ev;
  return {normalize(rot), ev / max_component(ev)};
}

ConvertedScene splats_to_gaussians(const SplatAsset& asset, const SplatConvertConfig& config) {
  ConvertedScene out;
  for (auto& s : asset.splats) {
    auto rot = normalize(s.rot);
    vec3 view;
    if (config.mean_camera_position && length(s.mu - *config.mean_camera_position) > 0) {
      view = normalize(s.mu - *config.mean_camera_position);
    } else {
      auto& sc  = s.scales;
      int   ax  = sc.x <= sc.y && sc.x <= sc.z ? 0 : (sc.y <= sc.z ? 1 : 2);
      view      = to_matrix(rot).column(ax);
    }
    GaussianPrimitive g;
    g.mu          = s.mu;
    g.rot         = rot;
    g.scales      = s.scales;
    g.magnitude   = remap_splat_magnitude(s, view);
    g.material_id = int(out.materials.size());
    Material m;
    m.bsdf.base_color = s.color;
    m.bsdf.roughness  = config.roughness;
    m.bsdf.metallic   = config.metallic;
    m.bsdf.specular   = config.specular;
    m.ndf             = ellipsoid_ndf(s.scales, rot);
    out.primitives.push_back(clamp_flat(g));
    out.materials.push_back(m);
  }
  return out;
}

namespace {

constexpr double sh_c0 = 0.28209479177387814;

enum struct PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_ply_type(const std::string& t) {
  if (t == "char" || t == "int8") return PlyType::i8;
  if (t == "uchar" || t == "uint8") return PlyType::u8;
  if (t == "short" || t == "int16") return PlyType::i16;
  if (t == "ushort" || t == "uint16") return PlyType::u16;
  if (t == "int" || t == "int32") return PlyType::i32;
  if (t == "uint" || t == "uint32") return PlyType::u32;
  if (t == "float" || t == "float32") return PlyType::f32;
  if (t == "double" || t == "float64") return PlyType::f64;
  throw std::runtime_error("unsupported PLY property type " + t);
}

size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

template <typename T>
double read_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return double(v);
}

double decode(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: return read_as<int8_t>(p);
    case PlyType::u8: return read_as<uint8_t>(p);
    case PlyType::i16: return read_as<int16_t>(p);
    case PlyType::u16: return read_as<uint16_t>(p);
    case PlyType::i32: return read_as<int32_t>(p);
    case PlyType::u32: return read_as<uint32_t>(p);
    case PlyType::f32: return read_as<float>(p);
    case PlyType::f64: return read_as<double>(p);
  }
  return 0;
}

}  // namespace

SplatAsset load_splat_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw std::runtime_error(path + ": not a PLY file");

  std::string format;
  size_t      count = 0;
  bool        in_vertex = false;
  std::vector<std::pair<std::string, PlyType>> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string        word;
    ss >> word;
    if (word == "format") {
      ss >> format;
    } else if (word == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> count;
      else if (props.empty())
        throw std::runtime_error(path + ": vertex element must come first");
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ss >> type;
      if (type == "list") throw std::runtime_error(path + ": list properties unsupported");
      ss >> name;
      props.push_back({name, parse_ply_type(type)});
    } else if (word == "end_header") {
      break;
    }
  }
  if (format != "binary_little_endian" && format != "ascii")
    throw std::runtime_error(path + ": unsupported PLY format " + format);

  std::map<std::string, size_t> column;
  for (size_t i = 0; i < props.size(); i++) column[props[i].first] = i;
  for (auto name : {"x", "y", "z"})
    if (!column.count(name)) throw std::runtime_error(path + ": missing " + name);

  std::vector<size_t> offsets;
  size_t              stride = 0;
  for (auto& p : props) offsets.push_back(stride), stride += ply_size(p.second);

  SplatAsset        asset;
  std::vector<char> record(stride);
  std::vector<double> values(props.size());
  for (size_t v = 0; v < count; v++) {
    if (format == "ascii") {
      for (auto& x : values)
        if (!(in >> x)) throw std::runtime_error(path + ": truncated data");
    } else {
      if (!in.read(record.data(), std::streamsize(stride)))
        throw std::runtime_error(path + ": truncated data");
      for (size_t i = 0; i < props.size(); i++)
        values[i] = decode(props[i].second, record.data() + offsets[i]);
    }
    auto get = [&](const char* name, double fallback) {
      auto it = column.find(name);
      return it == column.end() ? fallback : values[it->second];
    };
    Splat s;
    s.mu      = {get("x", 0), get("y", 0), get("z", 0)};
    s.scales  = {std::exp(get("scale_0", 0)), std::exp(get("scale_1", 0)),
        std::exp(get("scale_2", 0))};
    s.opacity = 1 / (1 + std::exp(-get("opacity", 20)));
    quat q    = {get("rot_0", 1), get("rot_1", 0), get("rot_2", 0), get("rot_3", 0)};
    s.rot     = norm2(q) > 0 ? normalize(q) : quat{};
    for (int c = 0; c < 3; c++) {
      auto name = "f_dc_" + std::to_string(c);
      s.color[c] = std::clamp(0.5 + sh_c0 * get(name.c_str(), 0), 0.0, 1.0);
    }
    asset.splats.push_back(s);
  }
  return asset;
}

void save_splat_ply(const std::string& path, const SplatAsset& asset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const char* names[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1",
      "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
      "rot_2", "rot_3"};
  out << "ply\nformat binary_little_endian 1.0\nelement vertex "
      << asset.splats.size() << "\n";
  for (auto n : names) out << "property float " << n << "\n";
  out << "end_header\n";
  for (auto& s : asset.splats) {
    auto a = std::clamp(s.opacity, 1e-7, 1 - 1e-7);
    float rec[] = {float(s.mu.x), float(s.mu.y), float(s.mu.z), 0, 0, 0,
        float((s.color.x - 0.5) / sh_c0), float((s.color.y - 0.5) / sh_c0),
        float((s.color.z - 0.5) / sh_c0), float(std::log(a / (1 - a))),
        float(std::log(s.scales.x)), float(std::log(s.scales.y)),
        float(std::log(s.scales.z)), float(s.rot.w), float(s.rot.x),
        float(s.rot.y), float(s.rot.z)};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

// -----------------------------------------------------------------------------
// OBJ
// -----------------------------------------------------------------------------

static std::map<std::string, BaseBsdf> load_mtl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, BaseBsdf> out;
  BaseBsdf*                       cur = nullptr;
  std::string                     line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string        cmd;
    if (!(ss >> cmd) || cmd[0] == '#') continue;
    if (cmd == "newmtl") {
      std::string name;
      ss >> name;
      cur = &out[name];
      continue;
    }
    if (!cur) continue;
    if (cmd == "Kd") ss >> cur->base_color.x >> cur->base_color.y >> cur->base_color.z;
    else if (cmd == "Ke") ss >> cur->emission.x >> cur->emission.y >> cur->emission.z;
    else if (cmd == "Pr") ss >> cur->roughness;
    else if (cmd == "Pm") ss >> cur->metallic;
    else if (cmd == "Ns") {
      double ns;
      ss >> ns;
      cur->roughness = std::clamp(std::sqrt(2 / (ns + 2)), 0.0, 1.0);
    }
  }
  return out;
}

MeshAsset load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  MeshAsset                       mesh;
  std::vector<vec3>               normals;
  std::map<std::string, BaseBsdf> library;
  std::map<std::string, int>      material_index;
  int                             current = -1;
  // vertex/normal pairs are flattened so each output vertex has one normal
  std::map<std::pair<int, int>, int> remap;
  std::vector<vec3>                  raw_positions;
  bool                               any_normals = false;

  auto resolve = [](int idx, size_t size) {
    return idx < 0 ? int(size) + idx : idx - 1;
  };

  std::string line;
  int         line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    std::istringstream ss(line);
    std::string        cmd;
    if (!(ss >> cmd) || cmd[0] == '#') continue;
    if (cmd == "v") {
      vec3 p;
      if (!(ss >> p.x >> p.y >> p.z))
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad vertex");
      raw_positions.push_back(p);
    } else if (cmd == "vn") {
      vec3 n;
      ss >> n.x >> n.y >> n.z;
      normals.push_back(normalize(n));
    } else if (cmd == "mtllib") {
      std::string name;
      ss >> name;
      auto lib = load_mtl(std::filesystem::path(path).parent_path() / name);
      library.insert(lib.begin(), lib.end());
    } else if (cmd == "usemtl") {
      std::string name;
      ss >> name;
      auto it = material_index.find(name);
      if (it == material_index.end()) {
        auto lit = library.find(name);
        mesh.materials.push_back(lit == library.end() ? BaseBsdf{} : lit->second);
        it = material_index.emplace(name, int(mesh.materials.size()) - 1).first;
      }
      current = it->second;
    } else if (cmd == "f") {
      std::vector<int> face;
      std::string      token;
      while (ss >> token) {
        int  vi = 0, ni = 0;
        auto s1 = token.find('/');
        vi      = std::stoi(token.substr(0, s1));
        if (s1 != std::string::npos) {
          auto s2 = token.find('/', s1 + 1);
          if (s2 != std::string::npos && s2 + 1 < token.size())
            ni = std::stoi(token.substr(s2 + 1));
        }
        auto v = resolve(vi, raw_positions.size());
        auto n = ni ? resolve(ni, normals.size()) : -1;
        if (v < 0 || v >= int(raw_positions.size()) || n >= int(normals.size()))
          throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad index");
        auto [it, inserted] = remap.emplace(std::pair{v, n}, int(mesh.positions.size()));
        if (inserted) {
          mesh.positions.push_back(raw_positions[v]);
          mesh.normals.push_back(n >= 0 ? normals[n] : vec3{});
          any_normals |= n >= 0;
        }
        face.push_back(it->second);
      }
      if (current < 0) {
        mesh.materials.push_back(BaseBsdf{});
        current = int(mesh.materials.size()) - 1;
        material_index[""] = current;
      }
      for (size_t i = 2; i < face.size(); i++) {
        mesh.triangles.push_back({face[0], face[i - 1], face[i]});
        mesh.face_material.push_back(current);
      }
    }
  }
  if (!any_normals) mesh.normals.clear();
  return mesh;
}

}  // namespace gaussrt
