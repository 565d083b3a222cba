#include "hotspot/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "hotspot/rng.hpp"

namespace hotspot::geometry {

namespace {

double point_segment_distance(const Vec& p, const Vec& a, const Vec& b) {
  Vec ab = b - a;
  double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Winding number by signed crossing count; nonzero means inside.
int winding_number(const std::vector<Vec>& verts, const Vec& p) {
  int wn = 0;
  size_t n = verts.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec& a = verts[i];
    const Vec& b = verts[(i + 1) % n];
    double cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
    if (a[1] <= p[1]) {
      if (b[1] > p[1] && cross > 0) ++wn;
    } else {
      if (b[1] <= p[1] && cross < 0) --wn;
    }
  }
  return wn;
}

void check_dim(const Shape& s, const Vec& x) {
  if (s.dim() != x.size())
    throw std::invalid_argument("shape dimension " + std::to_string(s.dim()) +
                                " does not match query dimension " + std::to_string(x.size()));
}

}  // namespace

int Shape::dim() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle> || std::is_same_v<T, Polygon> ||
                      std::is_same_v<T, SegmentSoup>)
          return 2;
        else if constexpr (std::is_same_v<T, Sphere> || std::is_same_v<T, Torus>)
          return 3;
        else if constexpr (std::is_same_v<T, BooleanUnion>)
          return s.children.front()->dim();
        else
          return s.a->dim();
      },
      v);
}

double Shape::boundary_measure() const {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return 2.0 * std::numbers::pi * s.radius;
        } else if constexpr (std::is_same_v<T, Polygon>) {
          double len = 0;
          size_t n = s.vertices.size();
          for (size_t i = 0; i < n; ++i) len += (s.vertices[(i + 1) % n] - s.vertices[i]).norm();
          return len;
        } else if constexpr (std::is_same_v<T, SegmentSoup>) {
          double len = 0;
          for (const auto& seg : s.segments) len += (seg[1] - seg[0]).norm();
          return len;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return 4.0 * std::numbers::pi * s.radius * s.radius;
        } else if constexpr (std::is_same_v<T, Torus>) {
          return 4.0 * std::numbers::pi * std::numbers::pi * s.major * s.minor;
        } else if constexpr (std::is_same_v<T, BooleanUnion>) {
          double m = 0;
          for (const auto& c : s.children) m += c->boundary_measure();
          return m;
        } else {
          return s.a->boundary_measure() + s.b->boundary_measure();
        }
      },
      v);
}

Shape make_circle(const Vec& center, double radius) {
  if (radius <= 0) throw std::invalid_argument("circle radius must be positive");
  return Shape{Circle{center, radius}};
}

Shape make_polygon(std::vector<Vec> vertices) {
  if (vertices.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  double area2 = 0;
  size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec& a = vertices[i];
    const Vec& b = vertices[(i + 1) % n];
    area2 += a[0] * b[1] - b[0] * a[1];
  }
  if (area2 == 0) throw std::invalid_argument("polygon has zero area");
  return Shape{Polygon{std::move(vertices)}};
}

Shape make_segment_soup(std::vector<std::array<Vec, 2>> segments) {
  for (const auto& s : segments)
    if ((s[1] - s[0]).squaredNorm() == 0) throw std::invalid_argument("zero-length segment");
  return Shape{SegmentSoup{std::move(segments)}};
}

Shape make_sphere(const Vec& center, double radius) {
  if (radius <= 0) throw std::invalid_argument("sphere radius must be positive");
  return Shape{Sphere{center, radius}};
}

Shape make_torus(const Vec& center, double major, double minor) {
  if (major <= 0 || minor <= 0 || minor >= major)
    throw std::invalid_argument("torus needs 0 < minor < major");
  return Shape{Torus{center, major, minor}};
}

Shape make_union(std::vector<Shape> children) {
  if (children.empty()) throw std::invalid_argument("union of zero shapes");
  BooleanUnion u;
  int d = children.front().dim();
  for (auto& c : children) {
    if (c.dim() != d) throw std::invalid_argument("union children must share a dimension");
    u.children.push_back(std::make_shared<Shape>(std::move(c)));
  }
  return Shape{std::move(u)};
}

Shape make_difference(Shape a, Shape b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("difference operands must share a dimension");
  return Shape{BooleanDifference{std::make_shared<Shape>(std::move(a)),
                                 std::make_shared<Shape>(std::move(b))}};
}

double signed_distance_oracle(const Shape& shape, const Vec& x) {
  check_dim(shape, x);
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return (x - s.center).norm() - s.radius;
        } else if constexpr (std::is_same_v<T, Polygon>) {
          double d = std::numeric_limits<double>::infinity();
          size_t n = s.vertices.size();
          for (size_t i = 0; i < n; ++i)
            d = std::min(d, point_segment_distance(x, s.vertices[i], s.vertices[(i + 1) % n]));
          return winding_number(s.vertices, x) != 0 ? -d : d;
        } else if constexpr (std::is_same_v<T, SegmentSoup>) {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& seg : s.segments)
            d = std::min(d, point_segment_distance(x, seg[0], seg[1]));
          return d;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return (x - s.center).norm() - s.radius;
        } else if constexpr (std::is_same_v<T, Torus>) {
          Vec p = x - s.center;
          double q0 = std::hypot(p[0], p[1]) - s.major;
          return std::hypot(q0, p[2]) - s.minor;
        } else if constexpr (std::is_same_v<T, BooleanUnion>) {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& c : s.children) d = std::min(d, signed_distance_oracle(*c, x));
          return d;
        } else {
          return std::max(signed_distance_oracle(*s.a, x), -signed_distance_oracle(*s.b, x));
        }
      },
      shape.v);
}

namespace {

Vec sample_one_boundary_point(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  return std::visit(
      [&](const auto& s) -> Vec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          double th = 2.0 * std::numbers::pi * uni(rng);
          return vec2(s.center[0] + s.radius * std::cos(th), s.center[1] + s.radius * std::sin(th));
        } else if constexpr (std::is_same_v<T, Polygon>) {
          size_t n = s.vertices.size();
          double total = 0;
          for (size_t i = 0; i < n; ++i) total += (s.vertices[(i + 1) % n] - s.vertices[i]).norm();
          double target = uni(rng) * total;
          for (size_t i = 0; i < n; ++i) {
            const Vec& a = s.vertices[i];
            const Vec& b = s.vertices[(i + 1) % n];
            double len = (b - a).norm();
            if (target <= len || i + 1 == n) {
              double t = std::clamp(target / len, 0.0, 1.0);
              return (a + t * (b - a)).eval();
            }
            target -= len;
          }
          return s.vertices[0];
        } else if constexpr (std::is_same_v<T, SegmentSoup>) {
          double total = 0;
          for (const auto& seg : s.segments) total += (seg[1] - seg[0]).norm();
          double target = uni(rng) * total;
          for (size_t i = 0; i < s.segments.size(); ++i) {
            double len = (s.segments[i][1] - s.segments[i][0]).norm();
            if (target <= len || i + 1 == s.segments.size()) {
              double t = std::clamp(target / len, 0.0, 1.0);
              return (s.segments[i][0] + t * (s.segments[i][1] - s.segments[i][0])).eval();
            }
            target -= len;
          }
          return s.segments[0][0];
        } else if constexpr (std::is_same_v<T, Sphere>) {
          std::normal_distribution<double> g(0.0, 1.0);
          Vec d = vec3(g(rng), g(rng), g(rng));
          double nrm = d.norm();
          while (nrm < 1e-12) {
            d = vec3(g(rng), g(rng), g(rng));
            nrm = d.norm();
          }
          return (s.center + (s.radius / nrm) * d).eval();
        } else if constexpr (std::is_same_v<T, Torus>) {
          // Area element is (R + r cos(phi)); rejection on the minor angle.
          double phi;
          for (;;) {
            phi = 2.0 * std::numbers::pi * uni(rng);
            double w = (s.major + s.minor * std::cos(phi)) / (s.major + s.minor);
            if (uni(rng) <= w) break;
          }
          double th = 2.0 * std::numbers::pi * uni(rng);
          double ring = s.major + s.minor * std::cos(phi);
          return vec3(s.center[0] + ring * std::cos(th), s.center[1] + ring * std::sin(th),
                      s.center[2] + s.minor * std::sin(phi));
        } else if constexpr (std::is_same_v<T, BooleanUnion>) {
          double total = 0;
          for (const auto& c : s.children) total += c->boundary_measure();
          double target = uni(rng) * total;
          for (size_t i = 0; i < s.children.size(); ++i) {
            double m = s.children[i]->boundary_measure();
            if (target <= m || i + 1 == s.children.size())
              return sample_one_boundary_point(*s.children[i], rng);
            target -= m;
          }
          return sample_one_boundary_point(*s.children.back(), rng);
        } else {
          // Rejection: candidates from either operand's boundary, kept where
          // they lie on the boundary of the result.
          double ma = s.a->boundary_measure();
          double mb = s.b->boundary_measure();
          for (int attempt = 0; attempt < 100000; ++attempt) {
            bool from_a = uni(rng) * (ma + mb) < ma;
            Vec p = sample_one_boundary_point(from_a ? *s.a : *s.b, rng);
            double da = signed_distance_oracle(*s.a, p);
            double db = signed_distance_oracle(*s.b, p);
            if (from_a && db > 1e-10) return p;       // on A's boundary, outside B
            if (!from_a && da < -1e-10) return p;     // on B's boundary, inside A
          }
          throw NumericalError("boolean_difference boundary sampling did not converge");
        }
      },
      shape.v);
}

}  // namespace

PointCloud sample_boundary(const Shape& shape, std::int64_t n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("negative sample count");
  PointCloud cloud;
  int d = shape.dim();
  cloud.points.resize(d, n);
  cloud.offset = Vec::Zero(d);
  auto rng = substream(seed, "boundary-sampler");
  for (std::int64_t i = 0; i < n; ++i) cloud.points.col(i) = sample_one_boundary_point(shape, rng);
  return cloud;
}

PointCloud normalize_cloud(const PointCloud& cloud, double fraction, double radius) {
  if (cloud.size() == 0) throw std::invalid_argument("empty cloud");
  if (fraction <= 0 || fraction > 1) throw std::invalid_argument("fraction must be in (0,1]");
  std::int64_t n = cloud.size();
  Vec centroid = cloud.points.rowwise().mean();
  std::vector<double> norms(n);
  for (std::int64_t i = 0; i < n; ++i) norms[i] = (cloud.points.col(i) - centroid).norm();
  std::int64_t k = static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(n)));
  k = std::clamp<std::int64_t>(k, 1, n);
  std::nth_element(norms.begin(), norms.begin() + (k - 1), norms.end());
  double q = norms[k - 1];
  if (q <= 0) throw std::invalid_argument("degenerate cloud: all points identical");
  double s = radius / q;
  PointCloud out;
  out.points = (cloud.points.colwise() - centroid) * s;
  out.scale = 1.0 / s;
  out.offset = centroid;
  return out;
}

namespace {

Vec interp_zero(const Vec& pa, const Vec& pb, double va, double vb) {
  double t = va / (va - vb);
  return (pa + t * (pb - pa)).eval();
}

// Welds crossing vertices by the grid-node pair that generated them, so
// neighboring cells share vertices and the connectivity closes up.
struct EdgeWeld {
  std::unordered_map<std::uint64_t, int> map;
  LevelSet* ls = nullptr;

  int vertex(std::int64_t na, std::int64_t nb, Vec pa, Vec pb, double va, double vb) {
    if (na > nb) {
      std::swap(na, nb);
      std::swap(pa, pb);
      std::swap(va, vb);
    }
    std::uint64_t key = (static_cast<std::uint64_t>(na) << 32) | static_cast<std::uint64_t>(nb);
    auto it = map.find(key);
    if (it != map.end()) return it->second;
    ls->vertices.push_back(interp_zero(pa, pb, va, vb));
    int id = static_cast<int>(ls->vertices.size()) - 1;
    map.emplace(key, id);
    return id;
  }
};

void marching_squares(const ScalarGrid& grid, double iso, LevelSet& ls) {
  int nx = grid.res[0], ny = grid.res[1];
  auto value = [&](int i, int j) { return grid.values[static_cast<size_t>(i) * ny + j] - iso; };
  auto pos = [&](int i, int j) { return grid.cell_center({i, j, 0}); };
  EdgeWeld weld;
  weld.ls = &ls;
  for (int i = 0; i + 1 < nx; ++i) {
    for (int j = 0; j + 1 < ny; ++j) {
      double v[4] = {value(i, j), value(i + 1, j), value(i + 1, j + 1), value(i, j + 1)};
      Vec p[4] = {pos(i, j), pos(i + 1, j), pos(i + 1, j + 1), pos(i, j + 1)};
      std::int64_t node[4] = {static_cast<std::int64_t>(i) * ny + j,
                              static_cast<std::int64_t>(i + 1) * ny + j,
                              static_cast<std::int64_t>(i + 1) * ny + j + 1,
                              static_cast<std::int64_t>(i) * ny + j + 1};
      int code = 0;
      for (int c = 0; c < 4; ++c)
        if (v[c] < 0) code |= 1 << c;
      if (code == 0 || code == 15) continue;
      // Edge k joins corner k and corner (k+1)%4.
      auto edge_vertex = [&](int k) {
        int a = k, b = (k + 1) % 4;
        return weld.vertex(node[a], node[b], p[a], p[b], v[a], v[b]);
      };
      auto emit = [&](int ea, int eb) {
        ls.segments.push_back({edge_vertex(ea), edge_vertex(eb)});
      };
      switch (code) {
        case 1: emit(3, 0); break;
        case 2: emit(0, 1); break;
        case 3: emit(3, 1); break;
        case 4: emit(1, 2); break;
        case 5: {
          // Saddle: disambiguate with the cell-average sign.
          double mid = (v[0] + v[1] + v[2] + v[3]) / 4;
          if (mid < 0) {
            emit(3, 2);
            emit(1, 0);
          } else {
            emit(3, 0);
            emit(1, 2);
          }
          break;
        }
        case 6: emit(0, 2); break;
        case 7: emit(3, 2); break;
        case 8: emit(2, 3); break;
        case 9: emit(2, 0); break;
        case 10: {
          double mid = (v[0] + v[1] + v[2] + v[3]) / 4;
          if (mid < 0) {
            emit(0, 3);
            emit(2, 1);
          } else {
            emit(0, 1);
            emit(2, 3);
          }
          break;
        }
        case 11: emit(2, 1); break;
        case 12: emit(1, 3); break;
        case 13: emit(1, 0); break;
        case 14: emit(0, 3); break;
        default: break;
      }
    }
  }
}

// Kuhn 6-tet split of the cube along the 0-7 diagonal; face diagonals agree
// between neighboring cells, so the extracted surface is watertight.
constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                             {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};

void marching_tets(const ScalarGrid& grid, double iso, LevelSet& ls) {
  int nx = grid.res[0], ny = grid.res[1], nz = grid.res[2];
  auto value = [&](int i, int j, int k) {
    return grid.values[(static_cast<size_t>(i) * ny + j) * nz + k] - iso;
  };
  EdgeWeld weld;
  weld.ls = &ls;
  for (int i = 0; i + 1 < nx; ++i) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int k = 0; k + 1 < nz; ++k) {
        double cv[8];
        Vec cp[8];
        std::int64_t cn[8];
        for (int c = 0; c < 8; ++c) {
          int di = (c & 1), dj = (c >> 1) & 1, dk = (c >> 2) & 1;
          cv[c] = value(i + di, j + dj, k + dk);
          cp[c] = grid.cell_center({i + di, j + dj, k + dk});
          cn[c] = (static_cast<std::int64_t>(i + di) * ny + (j + dj)) * nz + (k + dk);
        }
        bool any_neg = false, any_pos = false;
        for (int c = 0; c < 8; ++c) (cv[c] < 0 ? any_neg : any_pos) = true;
        if (!any_neg || !any_pos) continue;
        for (const auto& tet : kTets) {
          double tv[4];
          int inside = 0;
          for (int c = 0; c < 4; ++c) {
            tv[c] = cv[tet[c]];
            if (tv[c] < 0) ++inside;
          }
          if (inside == 0 || inside == 4) continue;
          int neg[4], posn[4], nn = 0, np = 0;
          for (int c = 0; c < 4; ++c) (tv[c] < 0 ? neg[nn++] : posn[np++]) = c;
          auto ev = [&](int a, int b) {
            return weld.vertex(cn[tet[a]], cn[tet[b]], cp[tet[a]], cp[tet[b]], tv[a], tv[b]);
          };
          if (inside == 1 || inside == 3) {
            int apex = (inside == 1) ? neg[0] : posn[0];
            int others[3], no = 0;
            for (int c = 0; c < 4; ++c)
              if (c != apex) others[no++] = c;
            int va = ev(apex, others[0]), vb = ev(apex, others[1]), vc = ev(apex, others[2]);
            ls.triangles.push_back({va, vb, vc});
          } else {
            // Two inside, two outside: quad split into two triangles.
            int va = ev(neg[0], posn[0]), vb = ev(neg[0], posn[1]);
            int vc = ev(neg[1], posn[1]), vd = ev(neg[1], posn[0]);
            ls.triangles.push_back({va, vb, vc});
            ls.triangles.push_back({va, vc, vd});
          }
        }
      }
    }
  }
}

}  // namespace

LevelSet extract_level_set(const ScalarGrid& grid, double iso) {
  if (grid.dim == 1) throw std::invalid_argument("level-set extraction is unsupported in 1D");
  for (int a = 0; a < grid.dim; ++a)
    if (grid.res[a] < 2) throw std::invalid_argument("grid resolution must be >= 2 per axis");
  LevelSet ls;
  ls.dim = grid.dim;
  if (grid.dim == 2)
    marching_squares(grid, iso, ls);
  else
    marching_tets(grid, iso, ls);
  return ls;
}

PointCloud load_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) {
      try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": cannot parse '" + tok + "'");
      }
    }
    if (vals.empty()) continue;
    if (dim < 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                       " coordinates, got " + std::to_string(vals.size()));
    if (dim < 1 || dim > 3)
      throw ParseError(path + ":" + std::to_string(lineno) + ": dimension must be 1..3");
    rows.push_back(std::move(vals));
  }
  PointCloud cloud;
  if (dim < 0) dim = 2;
  cloud.points.resize(dim, static_cast<std::int64_t>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (int a = 0; a < dim; ++a) cloud.points(a, static_cast<std::int64_t>(i)) = rows[i][a];
  cloud.offset = Vec::Zero(dim);
  return cloud;
}

void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (std::int64_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < cloud.dim(); ++a) {
      if (a) out << ' ';
      out << cloud.points(a, i);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ScalarGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  ScalarGrid g;
  std::string line;
  int lineno = 0;
  bool in_values = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    if (in_values) {
      double v;
      while (ss >> v) values.push_back(v);
      if (!ss.eof())
        throw ParseError(path + ":" + std::to_string(lineno) + ": cannot parse value");
      continue;
    }
    std::string key;
    if (!(ss >> key)) continue;
    auto read_axes = [&](Vec& v) {
      if (g.dim <= 0) throw ParseError(path + ":" + std::to_string(lineno) + ": dim must come first");
      v.resize(g.dim);
      for (int a = 0; a < g.dim; ++a)
        if (!(ss >> v[a]))
          throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(g.dim) + " numbers after " + key);
    };
    if (key == "dim") {
      if (!(ss >> g.dim) || g.dim < 1 || g.dim > 3)
        throw ParseError(path + ":" + std::to_string(lineno) + ": dim must be 1..3");
    } else if (key == "lower") {
      read_axes(g.lower);
    } else if (key == "upper") {
      read_axes(g.upper);
    } else if (key == "res") {
      if (g.dim <= 0) throw ParseError(path + ":" + std::to_string(lineno) + ": dim must come first");
      for (int a = 0; a < g.dim; ++a)
        if (!(ss >> g.res[a]) || g.res[a] < 1)
          throw ParseError(path + ":" + std::to_string(lineno) + ": bad res");
    } else if (key == "values") {
      in_values = true;
    } else {
      throw ParseError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (g.dim <= 0 || g.lower.size() != g.dim || g.upper.size() != g.dim || !in_values)
    throw ParseError(path + ": incomplete grid header");
  if (static_cast<std::int64_t>(values.size()) != g.cell_count())
    throw ParseError(path + ": expected " + std::to_string(g.cell_count()) + " values, got " +
                     std::to_string(values.size()));
  g.values = std::move(values);
  return g;
}

void save_grid(const ScalarGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "dim " << grid.dim << "\n";
  out << "lower";
  for (int a = 0; a < grid.dim; ++a) out << ' ' << grid.lower[a];
  out << "\nupper";
  for (int a = 0; a < grid.dim; ++a) out << ' ' << grid.upper[a];
  out << "\nres";
  for (int a = 0; a < grid.dim; ++a) out << ' ' << grid.res[a];
  out << "\nvalues\n";
  for (size_t i = 0; i < grid.values.size(); ++i)
    out << grid.values[i] << ((i + 1) % 8 == 0 ? '\n' : ' ');
  out << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

ScalarGrid sdf_grid(const Shape& shape, const Vec& lower, const Vec& upper,
                    const std::array<int, 3>& res) {
  ScalarGrid g;
  g.dim = shape.dim();
  g.lower = lower;
  g.upper = upper;
  g.res = res;
  g.values.resize(static_cast<size_t>(g.cell_count()));
  std::array<int, 3> idx{0, 0, 0};
  for (std::int64_t f = 0; f < g.cell_count(); ++f) {
    std::int64_t rem = f;
    for (int a = g.dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % g.res[a]);
      rem /= g.res[a];
    }
    g.values[static_cast<size_t>(f)] = signed_distance_oracle(shape, g.cell_center(idx));
  }
  return g;
}

double polyline_length(const LevelSet& ls) {
  double len = 0;
  for (const auto& s : ls.segments) len += (ls.vertices[s[1]] - ls.vertices[s[0]]).norm();
  return len;
}

double triangle_area(const LevelSet& ls) {
  double area = 0;
  for (const auto& t : ls.triangles) {
    Eigen::Vector3d a = ls.vertices[t[0]], b = ls.vertices[t[1]], c = ls.vertices[t[2]];
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

Eigen::MatrixXd sample_level_set(const LevelSet& ls, std::int64_t n, std::uint64_t seed) {
  auto rng = substream(seed, "level-set-sampler");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::MatrixXd out(ls.dim, n);
  if (ls.dim == 2) {
    if (ls.segments.empty()) throw std::invalid_argument("empty level set");
    std::vector<double> cum(ls.segments.size());
    double total = 0;
    for (size_t i = 0; i < ls.segments.size(); ++i) {
      total += (ls.vertices[ls.segments[i][1]] - ls.vertices[ls.segments[i][0]]).norm();
      cum[i] = total;
    }
    for (std::int64_t i = 0; i < n; ++i) {
      double target = uni(rng) * total;
      size_t k = std::lower_bound(cum.begin(), cum.end(), target) - cum.begin();
      if (k >= ls.segments.size()) k = ls.segments.size() - 1;
      const Vec& a = ls.vertices[ls.segments[k][0]];
      const Vec& b = ls.vertices[ls.segments[k][1]];
      out.col(i) = a + uni(rng) * (b - a);
    }
  } else {
    if (ls.triangles.empty()) throw std::invalid_argument("empty level set");
    std::vector<double> cum(ls.triangles.size());
    double total = 0;
    for (size_t i = 0; i < ls.triangles.size(); ++i) {
      const auto& t = ls.triangles[i];
      Eigen::Vector3d a = ls.vertices[t[0]], b = ls.vertices[t[1]], c = ls.vertices[t[2]];
      total += 0.5 * (b - a).cross(c - a).norm();
      cum[i] = total;
    }
    for (std::int64_t i = 0; i < n; ++i) {
      double target = uni(rng) * total;
      size_t k = std::lower_bound(cum.begin(), cum.end(), target) - cum.begin();
      if (k >= ls.triangles.size()) k = ls.triangles.size() - 1;
      const auto& t = ls.triangles[k];
      double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
      out.col(i) = (1 - r1) * ls.vertices[t[0]] + r1 * (1 - r2) * ls.vertices[t[1]] +
                   r1 * r2 * ls.vertices[t[2]];
    }
  }
  return out;
}

}  // namespace hotspot::geometry
