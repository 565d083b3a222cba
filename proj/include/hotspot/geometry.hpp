#pragma once

#include <memory>
#include <variant>

#include "hotspot/common.hpp"

namespace hotspot::geometry {

struct Shape;

struct Circle {
  Vec center;
  double radius;
};

// Closed polygon, implicitly closed from the last vertex back to the first.
struct Polygon {
  std::vector<Vec> vertices;
};

// Open segments; the distance oracle returns an unsigned distance.
struct SegmentSoup {
  std::vector<std::array<Vec, 2>> segments;
};

struct Sphere {
  Vec center;
  double radius;
};

struct Torus {
  Vec center;
  double major;  // ring radius R
  double minor;  // tube radius r, r < R
};

struct BooleanUnion {
  std::vector<std::shared_ptr<const Shape>> children;
};

struct BooleanDifference {
  std::shared_ptr<const Shape> a, b;
};

struct Shape {
  std::variant<Circle, Polygon, SegmentSoup, Sphere, Torus, BooleanUnion, BooleanDifference> v;

  int dim() const;
  // Total boundary measure (perimeter in 2D, area in 3D).
  double boundary_measure() const;
};

Shape make_circle(const Vec& center, double radius);
Shape make_polygon(std::vector<Vec> vertices);
Shape make_segment_soup(std::vector<std::array<Vec, 2>> segments);
Shape make_sphere(const Vec& center, double radius);
Shape make_torus(const Vec& center, double major, double minor);
Shape make_union(std::vector<Shape> children);
Shape make_difference(Shape a, Shape b);

// Exact signed distance, negative inside. For boolean_union this is the min
// over children: exact when the children are disjoint, an approximation
// otherwise. boolean_difference uses max(a, -b) with the same caveat.
double signed_distance_oracle(const Shape& shape, const Vec& x);

// n points on the boundary, density proportional to boundary measure,
// deterministic in seed.
PointCloud sample_boundary(const Shape& shape, std::int64_t n, std::uint64_t seed);

// Center at the centroid and scale so the ceil(fraction*n)-th order
// statistic of point norms equals `radius`. The transform field of the
// result records the inverse map.
PointCloud normalize_cloud(const PointCloud& cloud, double fraction = 0.7, double radius = 0.45);

// Marching squares (2D) / marching tetrahedra with a 6-tet cell split (3D).
LevelSet extract_level_set(const ScalarGrid& grid, double iso = 0.0);

PointCloud load_cloud(const std::string& path);
void save_cloud(const PointCloud& cloud, const std::string& path);

// Grid text format: `dim`, `lower`, `upper`, `res` header lines, then a
// `values` line followed by whitespace-separated samples in flat order.
ScalarGrid load_grid(const std::string& path);
void save_grid(const ScalarGrid& grid, const std::string& path);

// Ground-truth SDF sampled over a grid.
ScalarGrid sdf_grid(const Shape& shape, const Vec& lower, const Vec& upper,
                    const std::array<int, 3>& res);

double polyline_length(const LevelSet& ls);
double triangle_area(const LevelSet& ls);

// Area-uniform samples on the level set's segments/triangles.
Eigen::MatrixXd sample_level_set(const LevelSet& ls, std::int64_t n, std::uint64_t seed);

}  // namespace hotspot::geometry
