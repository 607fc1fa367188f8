#include "codim/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

namespace codim {

Primitive Primitive::vertex(int v) { return {Kind::Vertex, {v, -1, -1}}; }

Primitive Primitive::edge(int a, int b) {
  if (a > b) std::swap(a, b);
  return {Kind::Edge, {a, b, -1}};
}

Primitive Primitive::triangle(int a, int b, int c) {
  std::array<int, 3> idx = {a, b, c};
  std::sort(idx.begin(), idx.end());
  return {Kind::Triangle, idx};
}

bool Primitive::contains(int v) const {
  for (int i = 0; i < size(); ++i) {
    if (indices[i] == v) return true;
  }
  return false;
}

bool Primitive::shares_vertex(const Primitive& other) const {
  for (int i = 0; i < size(); ++i) {
    if (other.contains(indices[i])) return true;
  }
  return false;
}

std::uint64_t Stencil::key() const {
  const auto k = static_cast<std::uint64_t>(kind);
  return (k << 62) | (static_cast<std::uint64_t>(a) << 31) |
         static_cast<std::uint64_t>(b);
}

namespace {

void check_index(int v, int n) {
  if (v < 0 || v >= n) {
    throw ConfigError("mesh index " + std::to_string(v) + " out of range");
  }
}

}  // namespace

CodimMesh CodimMesh::rod(Positions reference, std::vector<Edge> edges) {
  CodimMesh m;
  m.kind_ = MeshKind::Rod;
  m.reference_ = std::move(reference);
  const int n = m.num_vertices();
  for (auto& e : edges) {
    check_index(e[0], n);
    check_index(e[1], n);
    if (e[0] == e[1]) throw ConfigError("degenerate edge: repeated vertex");
  }
  m.edges_ = std::move(edges);
  m.finalize();
  return m;
}

CodimMesh CodimMesh::shell(Positions reference,
                           std::vector<Triangle> triangles) {
  CodimMesh m;
  m.kind_ = MeshKind::Shell;
  m.reference_ = std::move(reference);
  const int n = m.num_vertices();
  std::map<std::pair<int, int>, int> edge_index;
  for (const auto& t : triangles) {
    for (int v : t) check_index(v, n);
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw ConfigError("degenerate triangle: repeated vertex");
    }
  }
  m.triangles_ = std::move(triangles);
  m.edge_triangles_.clear();
  for (int ti = 0; ti < m.num_triangles(); ++ti) {
    const auto& t = m.triangles_[ti];
    for (int k = 0; k < 3; ++k) {
      const int a = std::min(t[k], t[(k + 1) % 3]);
      const int b = std::max(t[k], t[(k + 1) % 3]);
      auto [it, inserted] =
          edge_index.try_emplace({a, b}, static_cast<int>(m.edges_.size()));
      if (inserted) {
        m.edges_.push_back({a, b});
        m.edge_triangles_.emplace_back();
      }
      m.edge_triangles_[it->second].push_back(ti);
    }
  }
  m.finalize();
  return m;
}

void CodimMesh::finalize() {
  const int n = num_vertices();
  vertex_edges_.assign(n, {});
  for (int e = 0; e < num_edges(); ++e) {
    vertex_edges_[edges_[e][0]].push_back(e);
    vertex_edges_[edges_[e][1]].push_back(e);
  }
  component_ = connected_components(*this);
  num_components_ =
      component_.empty()
          ? 0
          : *std::max_element(component_.begin(), component_.end()) + 1;
}

double CodimMesh::reference_edge_length(int e) const {
  return (reference_.col(edges_[e][0]) - reference_.col(edges_[e][1])).norm();
}

double CodimMesh::mean_reference_edge_length() const {
  if (edges_.empty()) return 0.0;
  double total = 0.0;
  for (int e = 0; e < num_edges(); ++e) total += reference_edge_length(e);
  return total / num_edges();
}

Primitive CodimMesh::edge_primitive(int e) const {
  return Primitive::edge(edges_[e][0], edges_[e][1]);
}

Primitive CodimMesh::triangle_primitive(int t) const {
  const auto& tri = triangles_[t];
  return Primitive::triangle(tri[0], tri[1], tri[2]);
}

Primitive CodimMesh::primitive(const Stencil& s, int side) const {
  if (s.kind == PairKind::EdgeEdge) return edge_primitive(side == 0 ? s.a : s.b);
  return side == 0 ? Primitive::vertex(s.a) : triangle_primitive(s.b);
}

Stencil CodimMesh::edge_edge(int e0, int e1) const {
  if (e0 > e1) std::swap(e0, e1);
  Stencil s;
  s.kind = PairKind::EdgeEdge;
  s.a = e0;
  s.b = e1;
  s.vertices = {edges_[e0][0], edges_[e0][1], edges_[e1][0], edges_[e1][1]};
  return s;
}

Stencil CodimMesh::point_triangle(int v, int t) const {
  Stencil s;
  s.kind = PairKind::PointTriangle;
  s.a = v;
  s.b = t;
  s.vertices = {v, triangles_[t][0], triangles_[t][1], triangles_[t][2]};
  return s;
}

StencilPoints<double> CodimMesh::gather(const Stencil& s,
                                        const Positions& x) const {
  StencilPoints<double> p;
  for (int i = 0; i < 4; ++i) p.col(i) = x.col(s.vertices[i]);
  return p;
}

std::vector<int> connected_components(const CodimMesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& e : mesh.edges()) {
    const int a = find(e[0]), b = find(e[1]);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> label(n, -1), root_label(n, -1);
  int next = 0;
  for (int v = 0; v < n; ++v) {
    const int r = find(v);
    if (root_label[r] < 0) root_label[r] = next++;
    label[v] = root_label[r];
  }
  return label;
}

namespace {

int other_end(const Edge& e, int v) { return e[0] == v ? e[1] : e[0]; }

}  // namespace

double parametric_distance(const CodimMesh& mesh, const Primitive& p1,
                           const Primitive& p2) {
  for (const auto* p : {&p1, &p2}) {
    for (int i = 0; i < p->size(); ++i) check_index(p->indices[i], mesh.num_vertices());
  }
  if (p1.shares_vertex(p2)) return 0.0;
  const auto& comp = mesh.component_ids();
  if (comp[p1.indices[0]] != comp[p2.indices[0]]) return kInfiniteDistance;

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<double> dist(mesh.num_vertices(), kInfiniteDistance);
  for (int i = 0; i < p1.size(); ++i) {
    dist[p1.indices[i]] = 0.0;
    queue.push({0.0, p1.indices[i]});
  }
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    if (p2.contains(v)) return d;
    for (int e : mesh.vertex_edges()[v]) {
      const int w = other_end(mesh.edges()[e], v);
      const double nd = d + mesh.reference_edge_length(e);
      if (nd < dist[w]) {
        dist[w] = nd;
        queue.push({nd, w});
      }
    }
  }
  return kInfiniteDistance;
}

int hop_distance(const CodimMesh& mesh, const Primitive& p1,
                 const Primitive& p2) {
  if (p1.shares_vertex(p2)) return 0;
  std::vector<int> hops(mesh.num_vertices(), -1);
  std::queue<int> queue;
  for (int i = 0; i < p1.size(); ++i) {
    hops[p1.indices[i]] = 0;
    queue.push(p1.indices[i]);
  }
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop();
    if (p2.contains(v)) return hops[v];
    for (int e : mesh.vertex_edges()[v]) {
      const int w = other_end(mesh.edges()[e], v);
      if (hops[w] < 0) {
        hops[w] = hops[v] + 1;
        queue.push(w);
      }
    }
  }
  return -1;
}

PairKind stencil_kind(const Primitive& p1, const Primitive& p2) {
  using K = Primitive::Kind;
  const K a = std::min(p1.kind, p2.kind), b = std::max(p1.kind, p2.kind);
  if (a == K::Vertex && b == K::Vertex) return PairKind::PointPoint;
  if (a == K::Vertex && b == K::Edge) return PairKind::PointEdge;
  if (a == K::Edge && b == K::Edge) return PairKind::EdgeEdge;
  if (a == K::Vertex && b == K::Triangle) return PairKind::PointTriangle;
  throw Error("primitive pair does not form a contact stencil");
}

double reference_distance(const CodimMesh& mesh, const Primitive& p1,
                          const Primitive& p2) {
  if (p1.shares_vertex(p2)) {
    throw Error("reference_distance: primitives share a vertex");
  }
  const PairKind kind = stencil_kind(p1, p2);
  // Lower-dimensional primitive first.
  const Primitive& lo = p1.kind <= p2.kind ? p1 : p2;
  const Primitive& hi = p1.kind <= p2.kind ? p2 : p1;
  StencilPoints<double> x = StencilPoints<double>::Zero();
  int col = 0;
  for (const auto* p : {&lo, &hi}) {
    for (int i = 0; i < p->size(); ++i) {
      x.col(col++) = mesh.reference().col(p->indices[i]);
    }
  }
  return pair_distance_value(kind, x);
}

GeodesicBalls::GeodesicBalls(const CodimMesh& mesh, double radius)
    : radius_(radius), balls_(mesh.num_vertices()) {
  const int n = mesh.num_vertices();
  std::vector<double> dist(n, kInfiniteDistance);
  std::vector<int> touched;
  using Entry = std::pair<double, int>;
  std::vector<double> edge_len(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    edge_len[e] = mesh.reference_edge_length(e);
  }
  for (int s = 0; s < n; ++s) {
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    dist[s] = 0.0;
    touched.push_back(s);
    queue.push({0.0, s});
    auto& ball = balls_[s];
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (d > dist[v]) continue;
      ball.emplace_back(v, d);
      for (int e : mesh.vertex_edges()[v]) {
        const int w = other_end(mesh.edges()[e], v);
        const double nd = d + edge_len[e];
        if (nd < dist[w] && nd < radius_) {
          if (dist[w] == kInfiniteDistance) touched.push_back(w);
          dist[w] = nd;
          queue.push({nd, w});
        }
      }
    }
    std::sort(ball.begin(), ball.end());
    for (int v : touched) dist[v] = kInfiniteDistance;
    touched.clear();
  }
}

double GeodesicBalls::vertex_distance(int a, int b) const {
  const auto& ball = balls_[a];
  auto it = std::lower_bound(
      ball.begin(), ball.end(), b,
      [](const std::pair<int, double>& e, int v) { return e.first < v; });
  if (it != ball.end() && it->first == b) return it->second;
  return kInfiniteDistance;
}

double GeodesicBalls::distance(const Primitive& p1, const Primitive& p2) const {
  double best = kInfiniteDistance;
  for (int i = 0; i < p1.size(); ++i) {
    for (int j = 0; j < p2.size(); ++j) {
      best = std::min(best, vertex_distance(p1.indices[i], p2.indices[j]));
    }
  }
  return best;
}

HopBalls::HopBalls(const CodimMesh& mesh, int radius)
    : radius_(radius), balls_(mesh.num_vertices()) {
  const int n = mesh.num_vertices();
  std::vector<int> hops(n, -1);
  std::vector<int> frontier, next;
  for (int s = 0; s < n; ++s) {
    auto& ball = balls_[s];
    hops[s] = 0;
    ball.push_back(s);
    frontier.assign(1, s);
    for (int h = 1; h <= radius_ && !frontier.empty(); ++h) {
      next.clear();
      for (int v : frontier) {
        for (int e : mesh.vertex_edges()[v]) {
          const int w = other_end(mesh.edges()[e], v);
          if (hops[w] < 0) {
            hops[w] = h;
            ball.push_back(w);
            next.push_back(w);
          }
        }
      }
      frontier.swap(next);
    }
    for (int v : ball) hops[v] = -1;
    std::sort(ball.begin(), ball.end());
  }
}

bool HopBalls::within(const Primitive& p1, const Primitive& p2) const {
  for (int i = 0; i < p1.size(); ++i) {
    const auto& ball = balls_[p1.indices[i]];
    for (int j = 0; j < p2.size(); ++j) {
      if (std::binary_search(ball.begin(), ball.end(), p2.indices[j])) {
        return true;
      }
    }
  }
  return false;
}

CodimMesh parse_obj(std::istream& in) {
  std::vector<Vec3d> verts;
  std::vector<Edge> edges;
  std::vector<Triangle> tris;
  std::string line;
  int line_no = 0;
  auto resolve = [&](const std::string& token) {
    // Accept "i", "i/t", "i/t/n"; negative indices are relative.
    const int raw = std::stoi(token.substr(0, token.find('/')));
    const int idx = raw < 0 ? static_cast<int>(verts.size()) + raw : raw - 1;
    if (idx < 0) {
      throw ConfigError("OBJ line " + std::to_string(line_no) +
                        ": bad vertex index");
    }
    return idx;
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3d p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw ConfigError("OBJ line " + std::to_string(line_no) +
                          ": malformed vertex");
      }
      verts.push_back(p);
    } else if (tag == "l") {
      std::vector<int> ids;
      std::string tok;
      while (ls >> tok) ids.push_back(resolve(tok));
      for (size_t i = 1; i < ids.size(); ++i) edges.push_back({ids[i - 1], ids[i]});
    } else if (tag == "f") {
      std::vector<int> ids;
      std::string tok;
      while (ls >> tok) ids.push_back(resolve(tok));
      if (ids.size() < 3) {
        throw ConfigError("OBJ line " + std::to_string(line_no) +
                          ": face with fewer than 3 vertices");
      }
      for (size_t i = 1; i + 1 < ids.size(); ++i) {
        tris.push_back({ids[0], ids[i], ids[i + 1]});
      }
    }
  }
  if (!edges.empty() && !tris.empty()) {
    throw ConfigError("OBJ mixes polylines and faces");
  }
  Positions x(3, static_cast<Eigen::Index>(verts.size()));
  for (size_t i = 0; i < verts.size(); ++i) x.col(i) = verts[i];
  if (!tris.empty()) return CodimMesh::shell(std::move(x), std::move(tris));
  return CodimMesh::rod(std::move(x), std::move(edges));
}

CodimMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open OBJ file " + path.string());
  return parse_obj(in);
}

void write_obj(std::ostream& out, const CodimMesh& mesh, const Positions& x) {
  char buf[96];
  for (int v = 0; v < x.cols(); ++v) {
    std::snprintf(buf, sizeof(buf), "v %.12g %.12g %.12g\n", x(0, v), x(1, v),
                  x(2, v));
    out << buf;
  }
  if (mesh.kind() == MeshKind::Shell) {
    for (const auto& t : mesh.triangles()) {
      out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
  } else {
    for (const auto& e : mesh.edges()) {
      out << "l " << e[0] + 1 << ' ' << e[1] + 1 << '\n';
    }
  }
}

double total_measure(const CodimMesh& mesh, const Positions& x) {
  double total = 0.0;
  if (mesh.kind() == MeshKind::Shell) {
    for (const auto& t : mesh.triangles()) {
      total += 0.5 * (x.col(t[1]) - x.col(t[0]))
                         .cross(x.col(t[2]) - x.col(t[0]))
                         .norm();
    }
  } else {
    for (const auto& e : mesh.edges()) total += (x.col(e[0]) - x.col(e[1])).norm();
  }
  return total;
}

}  // namespace codim
