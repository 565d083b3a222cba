#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hotspot {

// Spatial vector, dimension 1..3, no heap allocation.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

inline Vec vec1(double x) {
  Vec v(1);
  v << x;
  return v;
}
inline Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}
inline Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point cloud in domain coordinates. `scale`/`offset` map stored
// coordinates back to source coordinates: src = scale * stored + offset.
struct PointCloud {
  Eigen::MatrixXd points;  // d x n, one column per point
  double scale = 1.0;
  Vec offset;

  int dim() const { return static_cast<int>(points.rows()); }
  std::int64_t size() const { return points.cols(); }
};

// Regular grid of field samples over an axis-aligned box. Samples live at
// cell centers; storage is row-major over (i0, i1, ..., i_{d-1}).
struct ScalarGrid {
  Vec lower, upper;
  std::array<int, 3> res{1, 1, 1};
  int dim = 0;
  std::vector<double> values;

  std::int64_t cell_count() const {
    std::int64_t n = 1;
    for (int a = 0; a < dim; ++a) n *= res[a];
    return n;
  }
  Vec cell_center(const std::array<int, 3>& idx) const {
    Vec p(dim);
    for (int a = 0; a < dim; ++a) {
      double h = (upper[a] - lower[a]) / res[a];
      p[a] = lower[a] + (idx[a] + 0.5) * h;
    }
    return p;
  }
  std::int64_t flat_index(const std::array<int, 3>& idx) const {
    std::int64_t f = 0;
    for (int a = 0; a < dim; ++a) f = f * res[a] + idx[a];
    return f;
  }
  bool same_spec(const ScalarGrid& o) const {
    if (dim != o.dim) return false;
    for (int a = 0; a < dim; ++a)
      if (res[a] != o.res[a] || lower[a] != o.lower[a] || upper[a] != o.upper[a]) return false;
    return true;
  }
};

// Piecewise-linear zero crossing of a ScalarGrid: segments in 2D,
// triangles in 3D.
struct LevelSet {
  int dim = 0;
  std::vector<Vec> vertices;
  std::vector<std::array<int, 2>> segments;
  std::vector<std::array<int, 3>> triangles;
};

}  // namespace hotspot
