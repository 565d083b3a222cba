#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hotspot/common.hpp"
#include "hotspot/field.hpp"

namespace hotspot::eval {

struct SdfMetrics {
  double rmse = 0, mae = 0, smape = 0;
  std::optional<double> rmse_near, mae_near, smape_near;
};

struct TraceStats {
  double mean_iterations = 0;
  double median_iterations = 0;
  int max_iterations = 0;
  double hit_ratio = 0;
};

struct MetricsReport {
  double iou = 0;
  double chamfer = 0;
  double hausdorff = 0;
  SdfMetrics sdf;
  std::optional<TraceStats> trace;
  int grid_res = 0;
};

struct Camera {
  Vec position = vec3(1, 0, 0.5);
  Vec look_at = vec3(0, 0, 0);
  Vec up = vec3(0, 0, 1);
  double vfov_deg = 60.0;
  int width = 500;
  int height = 500;
};

struct TraceResult {
  int width = 0, height = 0;
  int max_steps = 30;
  std::vector<int> iterations;       // per pixel, row-major
  std::vector<std::uint8_t> hit;
  std::vector<double> depth;         // valid where hit
  Eigen::MatrixXd normals;           // 3 x pixels, unit where hit
};

ScalarGrid grid_eval(const field::NeuralField& f, const Vec& lower, const Vec& upper,
                     const std::array<int, 3>& res);

// Inside-occupancy IoU over cell centers, occupancy = value < 0. Equals 1
// when both occupancies are empty.
double iou(const ScalarGrid& pred, const ScalarGrid& gt);

// (d_C, d_H) between point sets (one column per point). Two-sided by
// default; one_sided keeps only the A -> B halves.
std::pair<double, double> chamfer_hausdorff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                            bool one_sided = false);

// O(n*m) reference used to validate the bucketed nearest-neighbor path.
std::pair<double, double> chamfer_hausdorff_brute(const Eigen::MatrixXd& a,
                                                  const Eigen::MatrixXd& b,
                                                  bool one_sided = false);

// rmse/mae/smape over all cells plus the near-surface restriction
// |gt| < near_threshold. smape uses |p-g| / ((|p|+|g|)/2 + 1e-8), range
// [0, 2]. An empty near set leaves the near fields absent.
SdfMetrics sdf_metrics(const ScalarGrid& pred, const ScalarGrid& gt, double near_threshold = 0.1);

// Field access for tracing arbitrary scalar fields (closed-form references,
// not just neural nets). Both callbacks take one point per column.
struct TraceField {
  std::function<Eigen::RowVectorXd(const Eigen::MatrixXd&)> values;
  std::function<field::EvalResult(const Eigen::MatrixXd&)> values_and_grads;
};

// Per-pixel raymarch t <- t + u(p). Terminates on |u| < threshold (hit),
// on leaving the unit sphere while moving outward (miss), or at max_steps.
TraceResult sphere_trace(const field::NeuralField& f, const Camera& cam, int max_steps = 30,
                         double threshold = 5e-5);
TraceResult sphere_trace(const TraceField& f, const Camera& cam, int max_steps = 30,
                         double threshold = 5e-5);

TraceStats trace_stats(const TraceResult& tr);

// Binary PPM (P6) outputs. The heatmap is a diverging map, white at zero,
// warm positive, cold negative, with the zero contour drawn in black.
void write_heatmap_ppm(const ScalarGrid& grid, const std::string& path);
void write_iteration_map_ppm(const TraceResult& tr, const std::string& path);
void write_depth_map_ppm(const TraceResult& tr, const std::string& path);
void write_normal_map_ppm(const TraceResult& tr, const std::string& path);
void write_iteration_histogram_csv(const TraceResult& tr, const std::string& path);

enum class RenderKind { SdfHeatmap, IterationMap, DepthMap, NormalMap, IterationHistogramCsv };

void render_output(const ScalarGrid* grid, const TraceResult* trace, RenderKind kind,
                   const std::string& path);

void write_metrics_csv(const MetricsReport& rep, const std::string& path);
// Single line `iou=... chamfer=...`, floats at 9 significant digits.
std::string summary_line(const MetricsReport& rep);

}  // namespace hotspot::eval
