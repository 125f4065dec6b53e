#include "tapestry/error.hpp"
#include "tapestry/mesh.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tapestry {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(ErrorCode::MalformedGeometry, fmt::format("line {}: bad number '{}'", line, tok));
  }
  return v;
}

// Resolves a 1-based (or negative, relative) OBJ index.
std::uint32_t resolve_index(std::string_view tok, std::size_t count, int line) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    fail(ErrorCode::MalformedGeometry, fmt::format("line {}: bad index '{}'", line, tok));
  }
  const long long idx = v > 0 ? v - 1 : static_cast<long long>(count) + v;
  if (idx < 0 || idx >= static_cast<long long>(count)) {
    fail(ErrorCode::MalformedGeometry,
         fmt::format("line {}: index {} out of range ({} elements)", line, v, count));
  }
  return static_cast<std::uint32_t>(idx);
}

LoadedMesh finish(TriangleMesh mesh, bool need_normals) {
  if (mesh.faces.empty()) fail(ErrorCode::EmptyMesh, "mesh has zero faces");
  LoadedMesh out;
  if (need_normals) {
    compute_vertex_normals(mesh);
    out.normals_synthesized = true;
  } else {
    for (Vec3& n : mesh.normals) {
      const double len = n.norm();
      if (!(len > 0.0)) fail(ErrorCode::MalformedGeometry, "zero-length normal");
      n /= len;
    }
  }
  mesh.validate();
  out.bakeable = mesh.has_uvs();
  out.mesh = std::move(mesh);
  return out;
}

} // namespace

LoadedMesh load_obj_from_string(const std::string& text) {
  TriangleMesh mesh;
  bool any_missing_normal = false;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = split_ws(line);
    const std::string_view tag = tokens.front();
    if (tag == "v") {
      if (tokens.size() < 4) fail(ErrorCode::MalformedGeometry, fmt::format("line {}: short vertex", line_no));
      mesh.positions.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                  parse_double(tokens[3], line_no));
    } else if (tag == "vn") {
      if (tokens.size() < 4) fail(ErrorCode::MalformedGeometry, fmt::format("line {}: short normal", line_no));
      mesh.normals.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                parse_double(tokens[3], line_no));
    } else if (tag == "vt") {
      if (tokens.size() < 3) fail(ErrorCode::MalformedGeometry, fmt::format("line {}: short uv", line_no));
      mesh.uvs.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no));
    } else if (tag == "f") {
      if (tokens.size() < 4) fail(ErrorCode::MalformedGeometry, fmt::format("line {}: face with < 3 corners", line_no));
      std::vector<FaceCorner> poly;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        std::string_view tok = tokens[i];
        FaceCorner c;
        const auto s1 = tok.find('/');
        c.position = resolve_index(tok.substr(0, s1), mesh.positions.size(), line_no);
        if (s1 != std::string_view::npos) {
          const std::string_view rest = tok.substr(s1 + 1);
          const auto s2 = rest.find('/');
          const std::string_view vt = rest.substr(0, s2);
          if (!vt.empty()) c.uv = resolve_index(vt, mesh.uvs.size(), line_no);
          if (s2 != std::string_view::npos) {
            const std::string_view vn = rest.substr(s2 + 1);
            if (!vn.empty()) c.normal = resolve_index(vn, mesh.normals.size(), line_no);
          }
        }
        if (c.normal == kNoIndex) any_missing_normal = true;
        poly.push_back(c);
      }
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        mesh.faces.push_back(Face{poly[0], poly[i], poly[i + 1]});
      }
    }
    // Materials, groups and smoothing directives are ignored.
  }
  return finish(std::move(mesh), any_missing_normal);
}

LoadedMesh load_obj(const fs::path& path) {
  try {
    return load_obj_from_string(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

namespace {

struct GlbView {
  const nlohmann::json& doc;
  std::string_view bin;

  // Returns accessor data as doubles, `components` per element.
  std::vector<double> read_accessor(int accessor_index, int& components) const {
    const auto& accessors = doc.at("accessors");
    if (accessor_index < 0 || accessor_index >= static_cast<int>(accessors.size())) {
      fail(ErrorCode::MalformedGeometry, "glTF accessor index out of range");
    }
    const auto& acc = accessors.at(accessor_index);
    const std::string type = acc.at("type").get<std::string>();
    if (type == "SCALAR") components = 1;
    else if (type == "VEC2") components = 2;
    else if (type == "VEC3") components = 3;
    else if (type == "VEC4") components = 4;
    else fail(ErrorCode::MalformedGeometry, "unsupported glTF accessor type " + type);

    const int ctype = acc.at("componentType").get<int>();
    const bool normalized = acc.value("normalized", false);
    const std::size_t count = acc.at("count").get<std::size_t>();
    std::size_t csize = 0;
    switch (ctype) {
      case 5120: case 5121: csize = 1; break;
      case 5122: case 5123: csize = 2; break;
      case 5125: case 5126: csize = 4; break;
      default: fail(ErrorCode::MalformedGeometry, "unsupported glTF component type");
    }
    std::vector<double> out(count * components, 0.0);
    if (!acc.contains("bufferView")) return out;

    const auto& view = doc.at("bufferViews").at(acc.at("bufferView").get<int>());
    if (view.value("buffer", 0) != 0) fail(ErrorCode::MalformedGeometry, "only the GLB binary buffer is supported");
    const std::size_t base = view.value("byteOffset", std::size_t{0}) + acc.value("byteOffset", std::size_t{0});
    const std::size_t stride = view.value("byteStride", csize * components);
    const std::size_t view_end = view.value("byteOffset", std::size_t{0}) + view.at("byteLength").get<std::size_t>();
    if (count > 0 && base + stride * (count - 1) + csize * components > std::min(view_end, bin.size())) {
      fail(ErrorCode::MalformedGeometry, "glTF accessor exceeds its buffer");
    }
    for (std::size_t i = 0; i < count; ++i) {
      for (int k = 0; k < components; ++k) {
        const char* p = bin.data() + base + i * stride + k * csize;
        double v = 0.0;
        switch (ctype) {
          case 5120: { std::int8_t x; std::memcpy(&x, p, 1); v = normalized ? std::max(x / 127.0, -1.0) : x; break; }
          case 5121: { std::uint8_t x; std::memcpy(&x, p, 1); v = normalized ? x / 255.0 : x; break; }
          case 5122: { std::int16_t x; std::memcpy(&x, p, 2); v = normalized ? std::max(x / 32767.0, -1.0) : x; break; }
          case 5123: { std::uint16_t x; std::memcpy(&x, p, 2); v = normalized ? x / 65535.0 : x; break; }
          case 5125: { std::uint32_t x; std::memcpy(&x, p, 4); v = x; break; }
          case 5126: { float x; std::memcpy(&x, p, 4); v = x; break; }
        }
        out[i * components + k] = v;
      }
    }
    return out;
  }
};

Mat4 node_local_matrix(const nlohmann::json& node) {
  Mat4 m = Mat4::Identity();
  if (node.contains("matrix")) {
    const auto& a = node.at("matrix");
    for (int c = 0; c < 4; ++c) {
      for (int r = 0; r < 4; ++r) m(r, c) = a.at(c * 4 + r).get<double>();
    }
    return m;
  }
  Eigen::Affine3d t = Eigen::Affine3d::Identity();
  if (node.contains("translation")) {
    const auto& v = node.at("translation");
    t.translate(Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>()));
  }
  if (node.contains("rotation")) {
    const auto& q = node.at("rotation");
    t.rotate(Eigen::Quaterniond(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(),
                                q[2].get<double>()).normalized());
  }
  if (node.contains("scale")) {
    const auto& s = node.at("scale");
    t.scale(Vec3(s[0].get<double>(), s[1].get<double>(), s[2].get<double>()));
  }
  return t.matrix();
}

// Depth-first search for the first node carrying a mesh.
bool find_mesh_node(const nlohmann::json& doc, int node_index, const Mat4& parent,
                    int& mesh_index, Mat4& world) {
  const auto& node = doc.at("nodes").at(node_index);
  const Mat4 m = parent * node_local_matrix(node);
  if (node.contains("mesh")) {
    mesh_index = node.at("mesh").get<int>();
    world = m;
    return true;
  }
  if (node.contains("children")) {
    for (const auto& c : node.at("children")) {
      if (find_mesh_node(doc, c.get<int>(), m, mesh_index, world)) return true;
    }
  }
  return false;
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

} // namespace

LoadedMesh load_glb_from_bytes(const std::string& bytes) {
  if (bytes.size() < 20 || bytes.compare(0, 4, "glTF") != 0) {
    fail(ErrorCode::MalformedGeometry, "not a binary glTF file");
  }
  if (read_u32(bytes, 4) != 2) fail(ErrorCode::MalformedGeometry, "unsupported glTF version");
  std::size_t offset = 12;
  std::string json_text;
  std::string_view bin;
  while (offset + 8 <= bytes.size()) {
    const std::uint32_t len = read_u32(bytes, offset);
    const std::uint32_t type = read_u32(bytes, offset + 4);
    if (offset + 8 + len > bytes.size()) fail(ErrorCode::MalformedGeometry, "truncated GLB chunk");
    if (type == 0x4E4F534Au) json_text.assign(bytes.data() + offset + 8, len);
    else if (type == 0x004E4942u) bin = std::string_view(bytes.data() + offset + 8, len);
    offset += 8 + len;
  }
  if (json_text.empty()) fail(ErrorCode::MalformedGeometry, "GLB without JSON chunk");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedGeometry, std::string("bad glTF JSON: ") + e.what());
  }

  TriangleMesh mesh;
  bool need_normals = true;
  try {
    int mesh_index = -1;
    Mat4 world = Mat4::Identity();
    if (doc.contains("scenes") && doc.contains("nodes")) {
      const int scene = doc.value("scene", 0);
      for (const auto& n : doc.at("scenes").at(scene).value("nodes", nlohmann::json::array())) {
        if (find_mesh_node(doc, n.get<int>(), Mat4::Identity(), mesh_index, world)) break;
      }
    }
    if (mesh_index < 0) {
      if (!doc.contains("meshes") || doc.at("meshes").empty()) {
        fail(ErrorCode::EmptyMesh, "glTF file contains no mesh");
      }
      mesh_index = 0;
    }
    const auto& prim = doc.at("meshes").at(mesh_index).at("primitives").at(0);
    if (prim.value("mode", 4) != 4) fail(ErrorCode::MalformedGeometry, "only triangle primitives are supported");
    const auto& attrs = prim.at("attributes");
    const GlbView view{doc, bin};

    int comps = 0;
    const auto pos = view.read_accessor(attrs.at("POSITION").get<int>(), comps);
    if (comps != 3) fail(ErrorCode::MalformedGeometry, "POSITION must be VEC3");
    const std::size_t vcount = pos.size() / 3;
    const Mat3 linear = world.topLeftCorner<3, 3>();
    const Vec3 translation = world.topRightCorner<3, 1>();
    for (std::size_t i = 0; i < vcount; ++i) {
      mesh.positions.push_back(linear * Vec3(pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]) + translation);
    }
    if (attrs.contains("NORMAL")) {
      const auto nrm = view.read_accessor(attrs.at("NORMAL").get<int>(), comps);
      if (comps != 3 || nrm.size() != pos.size()) fail(ErrorCode::MalformedGeometry, "bad NORMAL accessor");
      const Mat3 normal_matrix = linear.inverse().transpose();
      for (std::size_t i = 0; i < vcount; ++i) {
        mesh.normals.push_back(normal_matrix * Vec3(nrm[3 * i], nrm[3 * i + 1], nrm[3 * i + 2]));
      }
      need_normals = false;
    }
    bool has_uv = false;
    if (attrs.contains("TEXCOORD_0")) {
      const auto uv = view.read_accessor(attrs.at("TEXCOORD_0").get<int>(), comps);
      if (comps != 2 || uv.size() / 2 != vcount) fail(ErrorCode::MalformedGeometry, "bad TEXCOORD_0 accessor");
      // glTF puts the UV origin at the top-left; flip to the OBJ convention.
      for (std::size_t i = 0; i < vcount; ++i) mesh.uvs.emplace_back(uv[2 * i], 1.0 - uv[2 * i + 1]);
      has_uv = true;
    }
    std::vector<std::uint32_t> indices;
    if (prim.contains("indices")) {
      const auto idx = view.read_accessor(prim.at("indices").get<int>(), comps);
      for (double d : idx) indices.push_back(static_cast<std::uint32_t>(d));
    } else {
      for (std::size_t i = 0; i < vcount; ++i) indices.push_back(static_cast<std::uint32_t>(i));
    }
    if (indices.size() % 3 != 0) fail(ErrorCode::MalformedGeometry, "index count not a multiple of 3");
    for (std::size_t i = 0; i < indices.size(); i += 3) {
      Face f;
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t v = indices[i + k];
        if (v >= vcount) fail(ErrorCode::MalformedGeometry, fmt::format("glTF index {} out of range", v));
        f[k].position = v;
        f[k].normal = need_normals ? kNoIndex : v;
        f[k].uv = has_uv ? v : kNoIndex;
      }
      mesh.faces.push_back(f);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedGeometry, std::string("bad glTF structure: ") + e.what());
  }
  return finish(std::move(mesh), need_normals);
}

LoadedMesh load_glb(const fs::path& path) {
  try {
    return load_glb_from_bytes(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

LoadedMesh load_mesh(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::Io, fmt::format("mesh file '{}' does not exist", path.string()));
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return load_obj(path);
  if (ext == ".glb") return load_glb(path);
  fail(ErrorCode::Io, fmt::format("unsupported mesh format '{}'", ext));
}

void save_obj(const TriangleMesh& mesh, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  for (const Vec3& p : mesh.positions) out << fmt::format("v {} {} {}\n", p.x(), p.y(), p.z());
  for (const Vec2& t : mesh.uvs) out << fmt::format("vt {} {}\n", t.x(), t.y());
  for (const Vec3& n : mesh.normals) out << fmt::format("vn {} {} {}\n", n.x(), n.y(), n.z());
  for (const Face& f : mesh.faces) {
    out << 'f';
    for (const FaceCorner& c : f) {
      out << ' ' << c.position + 1 << '/';
      if (c.uv != kNoIndex) out << c.uv + 1;
      out << '/' << c.normal + 1;
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::Io, fmt::format("failed writing '{}'", path.string()));
}

} // namespace tapestry
