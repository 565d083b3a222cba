#include "hotspot/eval.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <unordered_map>

namespace hotspot::eval {

ScalarGrid grid_eval(const field::NeuralField& f, const Vec& lower, const Vec& upper,
                     const std::array<int, 3>& res) {
  const int d = f.arch.input_dim;
  if (lower.size() != d || upper.size() != d)
    throw std::invalid_argument("grid/field dimension mismatch");
  ScalarGrid g;
  g.dim = d;
  g.lower = lower;
  g.upper = upper;
  g.res = res;
  std::int64_t total = g.cell_count();
  g.values.resize(static_cast<size_t>(total));

  const std::int64_t chunk = 8192;
  Eigen::MatrixXd pts(d, std::min(chunk, total));
  std::array<int, 3> idx{0, 0, 0};
  std::int64_t done = 0;
  while (done < total) {
    std::int64_t n = std::min(chunk, total - done);
    pts.resize(d, n);
    for (std::int64_t k = 0; k < n; ++k) {
      std::int64_t rem = done + k;
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(rem % res[a]);
        rem /= res[a];
      }
      pts.col(k) = g.cell_center(idx);
    }
    Eigen::RowVectorXd u = field::forward_batch(f, pts);
    for (std::int64_t k = 0; k < n; ++k) g.values[static_cast<size_t>(done + k)] = u[k];
    done += n;
  }
  return g;
}

double iou(const ScalarGrid& pred, const ScalarGrid& gt) {
  if (!pred.same_spec(gt)) throw std::invalid_argument("grid spec mismatch");
  std::int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    bool a = pred.values[i] < 0;
    bool b = gt.values[i] < 0;
    inter += (a && b);
    uni += (a || b);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Uniform-bucket nearest neighbor with expanding Chebyshev shells.
struct Buckets {
  int dim;
  Vec lo;
  double cell;
  std::array<int, 3> n{1, 1, 1};
  std::unordered_map<std::int64_t, std::vector<int>> map;
  const Eigen::MatrixXd* pts = nullptr;

  std::int64_t key(const std::array<int, 3>& c) const {
    std::int64_t k = 0;
    for (int a = 0; a < dim; ++a) k = k * n[a] + c[a];
    return k;
  }
  std::array<int, 3> cell_of(const Vec& p) const {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < dim; ++a)
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo[a]) / cell)), 0, n[a] - 1);
    return c;
  }
};

Buckets build_buckets(const Eigen::MatrixXd& pts) {
  Buckets b;
  b.dim = static_cast<int>(pts.rows());
  b.pts = &pts;
  Vec lo = pts.rowwise().minCoeff();
  Vec hi = pts.rowwise().maxCoeff();
  double ext = std::max((hi - lo).maxCoeff(), 1e-12);
  int k = std::clamp(static_cast<int>(std::round(
              std::pow(static_cast<double>(pts.cols()), 1.0 / b.dim))), 1, 256);
  b.cell = ext / k;
  b.lo = lo;
  for (int a = 0; a < b.dim; ++a)
    b.n[a] = std::max(1, static_cast<int>(std::floor((hi[a] - lo[a]) / b.cell)) + 1);
  for (int i = 0; i < pts.cols(); ++i) b.map[b.key(b.cell_of(pts.col(i)))].push_back(i);
  return b;
}

double nearest_dist(const Buckets& b, const Vec& q) {
  auto c0 = b.cell_of(q);
  double best = std::numeric_limits<double>::infinity();
  int max_ring = 0;
  for (int a = 0; a < b.dim; ++a) max_ring = std::max(max_ring, b.n[a]);
  for (int ring = 0; ring <= max_ring; ++ring) {
    std::array<int, 3> c{0, 0, 0};
    std::array<int, 3> from{0, 0, 0}, to{0, 0, 0};
    for (int a = 0; a < b.dim; ++a) {
      from[a] = std::max(0, c0[a] - ring);
      to[a] = std::min(b.n[a] - 1, c0[a] + ring);
    }
    auto visit = [&](const std::array<int, 3>& cc) {
      int cheb = 0;
      for (int a = 0; a < b.dim; ++a) cheb = std::max(cheb, std::abs(cc[a] - c0[a]));
      if (cheb != ring) return;
      auto it = b.map.find(b.key(cc));
      if (it == b.map.end()) return;
      for (int i : it->second) best = std::min(best, (b.pts->col(i) - q).norm());
    };
    if (b.dim == 2) {
      for (c[0] = from[0]; c[0] <= to[0]; ++c[0])
        for (c[1] = from[1]; c[1] <= to[1]; ++c[1]) visit(c);
    } else if (b.dim == 3) {
      for (c[0] = from[0]; c[0] <= to[0]; ++c[0])
        for (c[1] = from[1]; c[1] <= to[1]; ++c[1])
          for (c[2] = from[2]; c[2] <= to[2]; ++c[2]) visit(c);
    } else {
      for (c[0] = from[0]; c[0] <= to[0]; ++c[0]) visit(c);
    }
    // Any point in ring r+1 or beyond is at least r*cell away.
    if (best <= ring * b.cell && std::isfinite(best)) break;
  }
  return best;
}

std::pair<double, double> one_sided_cd(const Eigen::MatrixXd& a, const Buckets& bb) {
  double sum = 0, mx = 0;
  for (int i = 0; i < a.cols(); ++i) {
    double d = nearest_dist(bb, a.col(i));
    sum += d;
    mx = std::max(mx, d);
  }
  return {sum / a.cols(), mx};
}

std::pair<double, double> one_sided_brute(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double sum = 0, mx = 0;
  for (int i = 0; i < a.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < b.cols(); ++j) best = std::min(best, (a.col(i) - b.col(j)).norm());
    sum += best;
    mx = std::max(mx, best);
  }
  return {sum / a.cols(), mx};
}

}  // namespace

std::pair<double, double> chamfer_hausdorff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                            bool one_sided) {
  if (a.cols() == 0 || b.cols() == 0) throw std::invalid_argument("empty point set");
  if (a.rows() != b.rows()) throw std::invalid_argument("point set dimension mismatch");
  Buckets bb = build_buckets(b);
  auto [mean_ab, max_ab] = one_sided_cd(a, bb);
  if (one_sided) return {mean_ab, max_ab};
  Buckets ba = build_buckets(a);
  auto [mean_ba, max_ba] = one_sided_cd(b, ba);
  return {0.5 * (mean_ab + mean_ba), std::max(max_ab, max_ba)};
}

std::pair<double, double> chamfer_hausdorff_brute(const Eigen::MatrixXd& a,
                                                  const Eigen::MatrixXd& b, bool one_sided) {
  if (a.cols() == 0 || b.cols() == 0) throw std::invalid_argument("empty point set");
  auto [mean_ab, max_ab] = one_sided_brute(a, b);
  if (one_sided) return {mean_ab, max_ab};
  auto [mean_ba, max_ba] = one_sided_brute(b, a);
  return {0.5 * (mean_ab + mean_ba), std::max(max_ab, max_ba)};
}

SdfMetrics sdf_metrics(const ScalarGrid& pred, const ScalarGrid& gt, double near_threshold) {
  if (!pred.same_spec(gt)) throw std::invalid_argument("grid spec mismatch");
  const double delta = 1e-8;
  auto accumulate = [&](bool near_only) -> std::optional<std::array<double, 3>> {
    double se = 0, ae = 0, sm = 0;
    std::int64_t n = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
      double g = gt.values[i];
      if (near_only && std::abs(g) >= near_threshold) continue;
      double p = pred.values[i];
      double e = std::abs(p - g);
      se += e * e;
      ae += e;
      sm += e / (0.5 * (std::abs(p) + std::abs(g)) + delta);
      ++n;
    }
    if (n == 0) return std::nullopt;
    return std::array<double, 3>{std::sqrt(se / n), ae / n, sm / n};
  };
  SdfMetrics m;
  auto full = accumulate(false);
  if (!full) throw std::invalid_argument("empty grid");
  m.rmse = (*full)[0];
  m.mae = (*full)[1];
  m.smape = (*full)[2];
  if (auto near = accumulate(true)) {
    m.rmse_near = (*near)[0];
    m.mae_near = (*near)[1];
    m.smape_near = (*near)[2];
  }
  return m;
}

TraceResult sphere_trace(const field::NeuralField& f, const Camera& cam, int max_steps,
                         double threshold) {
  if (f.arch.input_dim != 3) throw std::invalid_argument("sphere tracing needs a 3D field");
  TraceField tf;
  tf.values = [&f](const Eigen::MatrixXd& p) { return field::forward_batch(f, p); };
  tf.values_and_grads = [&f](const Eigen::MatrixXd& p) { return field::forward_with_grad(f, p); };
  return sphere_trace(tf, cam, max_steps, threshold);
}

TraceResult sphere_trace(const TraceField& f, const Camera& cam, int max_steps,
                         double threshold) {
  if (!f.values || !f.values_and_grads) throw std::invalid_argument("missing field callbacks");
  if ((cam.position - cam.look_at).norm() == 0)
    throw std::invalid_argument("degenerate camera pose");
  if (cam.width < 1 || cam.height < 1) throw std::invalid_argument("bad resolution");

  const std::int64_t npix = static_cast<std::int64_t>(cam.width) * cam.height;
  TraceResult tr;
  tr.width = cam.width;
  tr.height = cam.height;
  tr.max_steps = max_steps;
  tr.iterations.assign(static_cast<size_t>(npix), 0);
  tr.hit.assign(static_cast<size_t>(npix), 0);
  tr.depth.assign(static_cast<size_t>(npix), 0.0);
  tr.normals = Eigen::MatrixXd::Zero(3, npix);

  Eigen::Vector3d pos(cam.position[0], cam.position[1], cam.position[2]);
  Eigen::Vector3d fwd = (Eigen::Vector3d(cam.look_at[0], cam.look_at[1], cam.look_at[2]) - pos)
                            .normalized();
  Eigen::Vector3d up0(cam.up[0], cam.up[1], cam.up[2]);
  Eigen::Vector3d right = fwd.cross(up0).normalized();
  Eigen::Vector3d vup = right.cross(fwd);
  double tan_half = std::tan(0.5 * cam.vfov_deg * std::numbers::pi_v<double> / 180.0);
  double aspect = static_cast<double>(cam.width) / cam.height;

  Eigen::MatrixXd dirs(3, npix);
  for (int py = 0; py < cam.height; ++py) {
    double ndc_y = (1.0 - 2.0 * (py + 0.5) / cam.height) * tan_half;
    for (int px = 0; px < cam.width; ++px) {
      double ndc_x = (2.0 * (px + 0.5) / cam.width - 1.0) * tan_half * aspect;
      Eigen::Vector3d d = (fwd + ndc_x * right + ndc_y * vup).normalized();
      dirs.col(static_cast<std::int64_t>(py) * cam.width + px) = d;
    }
  }

  std::vector<std::int64_t> active(static_cast<size_t>(npix));
  for (std::int64_t i = 0; i < npix; ++i) active[static_cast<size_t>(i)] = i;
  Eigen::VectorXd t = Eigen::VectorXd::Zero(npix);

  Eigen::MatrixXd pts;
  for (int step = 1; step <= max_steps && !active.empty(); ++step) {
    pts.resize(3, static_cast<std::int64_t>(active.size()));
    for (size_t k = 0; k < active.size(); ++k)
      pts.col(static_cast<std::int64_t>(k)) = pos + t[active[k]] * dirs.col(active[k]);
    Eigen::RowVectorXd u = f.values(pts);
    std::vector<std::int64_t> next;
    next.reserve(active.size());
    for (size_t k = 0; k < active.size(); ++k) {
      std::int64_t i = active[k];
      tr.iterations[static_cast<size_t>(i)] = step;
      double ui = u[static_cast<std::int64_t>(k)];
      if (std::abs(ui) < threshold) {
        tr.hit[static_cast<size_t>(i)] = 1;
        tr.depth[static_cast<size_t>(i)] = t[i];
        continue;
      }
      t[i] += ui;
      Eigen::Vector3d p = pos + t[i] * dirs.col(i);
      if (p.norm() > 1.0 && p.dot(dirs.col(i)) > 0) continue;  // diverged
      next.push_back(i);
    }
    active.swap(next);
  }

  std::vector<std::int64_t> hits;
  for (std::int64_t i = 0; i < npix; ++i)
    if (tr.hit[static_cast<size_t>(i)]) hits.push_back(i);
  if (!hits.empty()) {
    Eigen::MatrixXd hp(3, static_cast<std::int64_t>(hits.size()));
    for (size_t k = 0; k < hits.size(); ++k)
      hp.col(static_cast<std::int64_t>(k)) = pos + t[hits[k]] * dirs.col(hits[k]);
    field::EvalResult er = f.values_and_grads(hp);
    for (size_t k = 0; k < hits.size(); ++k) {
      Eigen::Vector3d g = er.grads.col(static_cast<std::int64_t>(k));
      double gn = g.norm();
      if (gn > 0) tr.normals.col(hits[k]) = g / gn;
    }
  }
  return tr;
}

TraceStats trace_stats(const TraceResult& tr) {
  TraceStats s;
  std::vector<int> iters = tr.iterations;
  if (iters.empty()) return s;
  double sum = 0;
  std::int64_t hits = 0;
  for (size_t i = 0; i < iters.size(); ++i) {
    sum += iters[i];
    s.max_iterations = std::max(s.max_iterations, iters[i]);
    hits += tr.hit[i];
  }
  s.mean_iterations = sum / static_cast<double>(iters.size());
  std::nth_element(iters.begin(), iters.begin() + static_cast<std::ptrdiff_t>(iters.size() / 2),
                   iters.end());
  s.median_iterations = iters[iters.size() / 2];
  s.hit_ratio = static_cast<double>(hits) / static_cast<double>(iters.size());
  return s;
}

namespace {

void write_ppm(const std::string& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

void write_heatmap_ppm(const ScalarGrid& grid, const std::string& path) {
  if (grid.dim != 2) throw std::invalid_argument("heatmap needs a 2D grid");
  int w = grid.res[0], h = grid.res[1];
  double vmax = 0;
  for (double v : grid.values) vmax = std::max(vmax, std::abs(v));
  std::vector<std::uint8_t> rgb(static_cast<size_t>(w) * h * 3, 255);
  auto value = [&](int i, int j) {
    return grid.values[static_cast<size_t>(i) * h + j];
  };
  for (int py = 0; py < h; ++py) {
    int j = h - 1 - py;  // image rows top-down, grid j bottom-up
    for (int i = 0; i < w; ++i) {
      size_t o = (static_cast<size_t>(py) * w + i) * 3;
      double v = value(i, j);
      bool contour = false;
      bool occ = v < 0;
      if (i + 1 < w && ((value(i + 1, j) < 0) != occ)) contour = true;
      if (j + 1 < h && ((value(i, j + 1) < 0) != occ)) contour = true;
      if (contour) {
        rgb[o] = rgb[o + 1] = rgb[o + 2] = 0;
        continue;
      }
      double s = (vmax > 0) ? v / vmax : 0.0;
      if (s >= 0) {
        rgb[o] = 255;
        rgb[o + 1] = to_byte(255 * (1 - s));
        rgb[o + 2] = to_byte(255 * (1 - s));
      } else {
        rgb[o] = to_byte(255 * (1 + s));
        rgb[o + 1] = to_byte(255 * (1 + s));
        rgb[o + 2] = 255;
      }
    }
  }
  write_ppm(path, w, h, rgb);
}

void write_iteration_map_ppm(const TraceResult& tr, const std::string& path) {
  std::vector<std::uint8_t> rgb(static_cast<size_t>(tr.width) * tr.height * 3);
  for (size_t i = 0; i < tr.iterations.size(); ++i) {
    std::uint8_t v = to_byte(255.0 * tr.iterations[i] / tr.max_steps);
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
  }
  write_ppm(path, tr.width, tr.height, rgb);
}

void write_depth_map_ppm(const TraceResult& tr, const std::string& path) {
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0;
  for (size_t i = 0; i < tr.depth.size(); ++i) {
    if (!tr.hit[i]) continue;
    dmin = std::min(dmin, tr.depth[i]);
    dmax = std::max(dmax, tr.depth[i]);
  }
  double span = (dmax > dmin) ? dmax - dmin : 1.0;
  std::vector<std::uint8_t> rgb(static_cast<size_t>(tr.width) * tr.height * 3, 0);
  for (size_t i = 0; i < tr.depth.size(); ++i) {
    if (!tr.hit[i]) continue;
    std::uint8_t v = to_byte(64 + 191 * (1.0 - (tr.depth[i] - dmin) / span));
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
  }
  write_ppm(path, tr.width, tr.height, rgb);
}

void write_normal_map_ppm(const TraceResult& tr, const std::string& path) {
  std::vector<std::uint8_t> rgb(static_cast<size_t>(tr.width) * tr.height * 3, 0);
  for (size_t i = 0; i < tr.hit.size(); ++i) {
    if (!tr.hit[i]) continue;
    for (int a = 0; a < 3; ++a)
      rgb[3 * i + static_cast<size_t>(a)] =
          to_byte(127.5 * (tr.normals(a, static_cast<std::int64_t>(i)) + 1.0));
  }
  write_ppm(path, tr.width, tr.height, rgb);
}

void write_iteration_histogram_csv(const TraceResult& tr, const std::string& path) {
  std::vector<std::int64_t> counts(static_cast<size_t>(tr.max_steps) + 1, 0);
  for (int it : tr.iterations)
    counts[static_cast<size_t>(std::clamp(it, 0, tr.max_steps))]++;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iterations,count\n";
  for (size_t i = 0; i < counts.size(); ++i) out << i << "," << counts[i] << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

void render_output(const ScalarGrid* grid, const TraceResult* trace, RenderKind kind,
                   const std::string& path) {
  switch (kind) {
    case RenderKind::SdfHeatmap:
      if (!grid) throw std::invalid_argument("heatmap needs a grid payload");
      write_heatmap_ppm(*grid, path);
      return;
    case RenderKind::IterationMap:
      if (!trace) throw std::invalid_argument("iteration map needs a trace payload");
      write_iteration_map_ppm(*trace, path);
      return;
    case RenderKind::DepthMap:
      if (!trace) throw std::invalid_argument("depth map needs a trace payload");
      write_depth_map_ppm(*trace, path);
      return;
    case RenderKind::NormalMap:
      if (!trace) throw std::invalid_argument("normal map needs a trace payload");
      write_normal_map_ppm(*trace, path);
      return;
    case RenderKind::IterationHistogramCsv:
      if (!trace) throw std::invalid_argument("histogram needs a trace payload");
      write_iteration_histogram_csv(*trace, path);
      return;
  }
  throw std::invalid_argument("unknown render kind");
}

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const MetricsReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "metric,value\n";
  out << "iou," << fmt9(rep.iou) << "\n";
  out << "chamfer," << fmt9(rep.chamfer) << "\n";
  out << "hausdorff," << fmt9(rep.hausdorff) << "\n";
  out << "rmse," << fmt9(rep.sdf.rmse) << "\n";
  out << "mae," << fmt9(rep.sdf.mae) << "\n";
  out << "smape," << fmt9(rep.sdf.smape) << "\n";
  if (rep.sdf.rmse_near) out << "rmse_near," << fmt9(*rep.sdf.rmse_near) << "\n";
  if (rep.sdf.mae_near) out << "mae_near," << fmt9(*rep.sdf.mae_near) << "\n";
  if (rep.sdf.smape_near) out << "smape_near," << fmt9(*rep.sdf.smape_near) << "\n";
  out << "grid_res," << rep.grid_res << "\n";
  if (rep.trace) {
    out << "trace_mean_iterations," << fmt9(rep.trace->mean_iterations) << "\n";
    out << "trace_median_iterations," << fmt9(rep.trace->median_iterations) << "\n";
    out << "trace_max_iterations," << rep.trace->max_iterations << "\n";
    out << "trace_hit_ratio," << fmt9(rep.trace->hit_ratio) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string summary_line(const MetricsReport& rep) {
  std::string s = "iou=" + fmt9(rep.iou) + " chamfer=" + fmt9(rep.chamfer) +
                  " hausdorff=" + fmt9(rep.hausdorff) + " rmse=" + fmt9(rep.sdf.rmse) +
                  " mae=" + fmt9(rep.sdf.mae) + " smape=" + fmt9(rep.sdf.smape);
  if (rep.sdf.rmse_near)
    s += " rmse_near=" + fmt9(*rep.sdf.rmse_near) + " mae_near=" + fmt9(*rep.sdf.mae_near) +
         " smape_near=" + fmt9(*rep.sdf.smape_near);
  s += " grid_res=" + std::to_string(rep.grid_res);
  if (rep.trace)
    s += " trace_mean_iters=" + fmt9(rep.trace->mean_iterations) +
         " trace_hit_ratio=" + fmt9(rep.trace->hit_ratio);
  return s;
}

}  // namespace hotspot::eval
