#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "hotspot/eval.hpp"
#include "hotspot/field.hpp"
#include "hotspot/geometry.hpp"
#include "hotspot/losses.hpp"
#include "hotspot/oracles.hpp"
#include "hotspot/rng.hpp"
#include "hotspot/trainer.hpp"

namespace fs = std::filesystem;
using namespace hotspot;

namespace {

constexpr const char* kVersion = "hotspot 1.0.0";

// Exit codes: 0 success, 1 usage, 2 numerical divergence, 3 input
// incompatibility.
struct IncompatibleInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("HOTSPOT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ParseError(std::string("HOTSPOT_THREADS: cannot parse '") + env + "'");
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

// Ordered key/value run record, written atomically at run end.
class Manifest {
 public:
  explicit Manifest(std::string command) { add("command", std::move(command)); }

  void add(const std::string& key, const std::string& value) {
    lines_.push_back(key + " = " + value);
  }
  void add(const std::string& key, double value) { add(key, fmt9(value)); }
  void add(const std::string& key, std::int64_t value) { add(key, std::to_string(value)); }
  void add_input(const std::string& path) { add("input " + path, file_hash(path)); }
  void add_output(const std::string& path) { add("output " + path, file_hash(path)); }

  void write(const std::string& dir, double wall_clock) {
    add("version", kVersion);
    add("wall_clock", wall_clock);
    fs::path tmp = fs::path(dir) / "manifest.txt.tmp";
    fs::path final_path = fs::path(dir) / "manifest.txt";
    {
      std::ofstream out(tmp);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      for (const auto& l : lines_) out << l << "\n";
      if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, final_path);
  }

 private:
  std::vector<std::string> lines_;
};

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// ---------------------------------------------------------------------------
// gen

const std::vector<std::string> kShapes = {"circle", "square", "rings", "star", "sphere", "torus"};

struct GenOpts {
  std::string shape;
  std::string out = ".";
  std::int64_t n = 10000;
  std::uint64_t seed = 0;
  int grid_res = 0;  // 0: 256 in 2D, 64 in 3D
  double r = 0.5;
  double inner = 0.25;          // rings inner radius
  double star_inner = 0.22;     // star inner vertex radius
  int star_points = 5;
  double torus_major = 0.35;
  double torus_minor = 0.12;
};

geometry::Shape build_shape(const GenOpts& o) {
  if (o.shape == "circle") return geometry::make_circle(vec2(0, 0), o.r);
  if (o.shape == "square") {
    double s = o.r;
    return geometry::make_polygon({vec2(-s, -s), vec2(s, -s), vec2(s, s), vec2(-s, s)});
  }
  if (o.shape == "rings")
    return geometry::make_difference(geometry::make_circle(vec2(0, 0), o.r),
                                     geometry::make_circle(vec2(0, 0), o.inner));
  if (o.shape == "star") {
    std::vector<Vec> verts;
    for (int k = 0; k < 2 * o.star_points; ++k) {
      double rad = (k % 2 == 0) ? o.r : o.star_inner;
      double a = std::numbers::pi / 2 + std::numbers::pi * k / o.star_points;
      verts.push_back(vec2(rad * std::cos(a), rad * std::sin(a)));
    }
    return geometry::make_polygon(std::move(verts));
  }
  if (o.shape == "sphere") return geometry::make_sphere(vec3(0, 0, 0), o.r);
  if (o.shape == "torus") return geometry::make_torus(vec3(0, 0, 0), o.torus_major, o.torus_minor);
  std::string names;
  for (const auto& s : kShapes) names += (names.empty() ? "" : ", ") + s;
  throw CLI::ValidationError("shape", "unknown shape '" + o.shape + "'; known shapes: " + names);
}

int cmd_gen(const GenOpts& o) {
  Timer timer;
  geometry::Shape shape = build_shape(o);
  const int d = shape.dim();
  int res = o.grid_res > 0 ? o.grid_res : (d == 2 ? 256 : 64);

  fs::create_directories(o.out);
  PointCloud cloud = geometry::sample_boundary(shape, o.n, o.seed);
  std::string cloud_path = (fs::path(o.out) / "cloud.txt").string();
  geometry::save_cloud(cloud, cloud_path);

  Vec lo = Vec::Constant(d, -1.5), hi = Vec::Constant(d, 1.5);
  std::array<int, 3> rr{1, 1, 1};
  for (int a = 0; a < d; ++a) rr[a] = res;
  ScalarGrid gt = geometry::sdf_grid(shape, lo, hi, rr);
  std::string grid_path = (fs::path(o.out) / "gt_grid.txt").string();
  geometry::save_grid(gt, grid_path);

  Manifest mf("gen " + o.shape);
  mf.add("seed", static_cast<std::int64_t>(o.seed));
  mf.add("n", o.n);
  mf.add("grid_res", static_cast<std::int64_t>(res));
  mf.add_output(cloud_path);
  mf.add_output(grid_path);
  mf.write(o.out, timer.seconds());
  std::cout << "wrote " << cloud_path << " (" << cloud.size() << " points) and " << grid_path
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string cloud;
  std::string config;
  std::string out = ".";
  bool log_machine = false;
  // Flag overrides; counts checked against the CLI11 app.
  std::int64_t iterations = 20000;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  int width = 128;
  int layers = 5;
  std::string activation = "softplus";
  double act_param = 100.0;
  std::int64_t n_uniform = 4096;
  std::int64_t n_gauss = 4096;
  double sigma = 0.5;
  double boundary_fraction = 0.1;
  std::int64_t eval_interval = 100;
  std::int64_t checkpoint_interval = 0;
  bool no_geometric_init = false;
  double init_radius = 0.5;
};

const std::vector<std::string> kTrainerKeys = {
    "iterations",    "lr",          "seed",           "width",
    "hidden_layers", "activation",  "act_param",      "n_uniform",
    "n_gauss",       "sigma",       "boundary_fraction", "eval_interval",
    "checkpoint_interval", "geometric_init", "init_radius"};

void apply_trainer_key(trainer::TrainConfig& cfg, const std::string& key,
                       const std::string& value, int lineno) {
  auto bad = [&](const std::string& what) {
    return ParseError("line " + std::to_string(lineno) + ": " + what + " for key '" + key + "': '" +
                      value + "'");
  };
  auto as_int = [&] {
    try {
      size_t used = 0;
      std::int64_t v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw bad("expected integer");
    }
  };
  auto as_double = [&] {
    try {
      size_t used = 0;
      double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw bad("expected number");
    }
  };
  if (key == "iterations") cfg.iterations = as_int();
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
  else if (key == "width") cfg.arch.width = static_cast<int>(as_int());
  else if (key == "hidden_layers") cfg.arch.hidden_layers = static_cast<int>(as_int());
  else if (key == "act_param") cfg.arch.act_param = as_double();
  else if (key == "n_uniform") cfg.n_uniform = as_int();
  else if (key == "n_gauss") cfg.n_gauss = as_int();
  else if (key == "sigma") cfg.sigma = as_double();
  else if (key == "boundary_fraction") cfg.boundary_fraction = as_double();
  else if (key == "eval_interval") cfg.eval_interval = as_int();
  else if (key == "checkpoint_interval") cfg.checkpoint_interval = as_int();
  else if (key == "geometric_init") cfg.geometric_init = as_int() != 0;
  else if (key == "init_radius") cfg.init_radius = as_double();
  else if (key == "activation") {
    if (value == "softplus") cfg.arch.activation = field::Activation::Softplus;
    else if (value == "sine") cfg.arch.activation = field::Activation::Sine;
    else throw bad("expected softplus or sine");
  } else {
    throw ParseError("unknown key '" + key + "'");
  }
}

// Splits a config file into trainer keys (handled here) and loss keys
// (delegated to the losses parser). Flags override afterwards (last wins).
void load_train_config(trainer::TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line, loss_text;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = line;
    auto hash = stripped.find('#');
    if (hash != std::string::npos) stripped.erase(hash);
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      if (stripped.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    std::string base = key.substr(0, key.find('.'));
    bool trainer_key = false;
    for (const auto& k : kTrainerKeys) trainer_key |= (base == k);
    if (trainer_key) {
      apply_trainer_key(cfg, key, value, lineno);
    } else {
      loss_text += line + "\n";
    }
  }
  if (!loss_text.empty()) {
    // Re-parse on top of the current loss config by merging serialized
    // defaults with the file's loss lines (later keys win in the parser).
    cfg.loss = losses::parse_loss_config(losses::serialize_loss_config(cfg.loss) + loss_text);
  }
}

std::string serialize_train_config(const trainer::TrainConfig& cfg) {
  std::ostringstream out;
  out << "iterations = " << cfg.iterations << "\n";
  out << "lr = " << fmt9(cfg.lr) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "width = " << cfg.arch.width << "\n";
  out << "hidden_layers = " << cfg.arch.hidden_layers << "\n";
  out << "activation = "
      << (cfg.arch.activation == field::Activation::Softplus ? "softplus" : "sine") << "\n";
  out << "act_param = " << fmt9(cfg.arch.act_param) << "\n";
  out << "n_uniform = " << cfg.n_uniform << "\n";
  out << "n_gauss = " << cfg.n_gauss << "\n";
  out << "sigma = " << fmt9(cfg.sigma) << "\n";
  out << "boundary_fraction = " << fmt9(cfg.boundary_fraction) << "\n";
  out << "eval_interval = " << cfg.eval_interval << "\n";
  out << "checkpoint_interval = " << cfg.checkpoint_interval << "\n";
  out << "geometric_init = " << (cfg.geometric_init ? 1 : 0) << "\n";
  out << "init_radius = " << fmt9(cfg.init_radius) << "\n";
  out << losses::serialize_loss_config(cfg.loss);
  return out.str();
}

int cmd_train(CLI::App* sub, const TrainOpts& o) {
  Timer timer;
  PointCloud cloud = geometry::load_cloud(o.cloud);
  if (cloud.size() == 0) throw IncompatibleInput("empty point cloud: " + o.cloud);

  trainer::TrainConfig cfg;
  cfg.arch.input_dim = cloud.dim();
  // Defaults tuned for desk-scale runs; full defaults live in TrainConfig.
  if (!o.config.empty()) load_train_config(cfg, o.config);

  auto passed = [&](const std::string& flag) { return sub->count(flag) > 0; };
  if (passed("--iterations")) cfg.iterations = o.iterations;
  if (passed("--lr")) cfg.lr = o.lr;
  if (passed("--seed")) cfg.seed = o.seed;
  if (passed("--width")) cfg.arch.width = o.width;
  if (passed("--layers")) cfg.arch.hidden_layers = o.layers;
  if (passed("--act-param")) cfg.arch.act_param = o.act_param;
  if (passed("--activation"))
    cfg.arch.activation =
        o.activation == "sine" ? field::Activation::Sine : field::Activation::Softplus;
  if (passed("--n-uniform")) cfg.n_uniform = o.n_uniform;
  if (passed("--n-gauss")) cfg.n_gauss = o.n_gauss;
  if (passed("--sigma")) cfg.sigma = o.sigma;
  if (passed("--boundary-fraction")) cfg.boundary_fraction = o.boundary_fraction;
  if (passed("--eval-interval")) cfg.eval_interval = o.eval_interval;
  if (passed("--checkpoint-interval")) cfg.checkpoint_interval = o.checkpoint_interval;
  if (passed("--no-geometric-init")) cfg.geometric_init = false;
  if (passed("--init-radius")) cfg.init_radius = o.init_radius;

  fs::create_directories(o.out);
  cfg.checkpoint_dir = o.out;
  if (o.log_machine) cfg.machine_out = &std::cout;
  cfg.progress_out = &std::cerr;

  trainer::TrainResult res = trainer::train(cloud, cfg);

  std::string ckpt_path = (fs::path(o.out) / "model.ckpt").string();
  field::save_checkpoint({res.field, res.adam, res.iteration}, ckpt_path);
  std::string hist_path = (fs::path(o.out) / "history.csv").string();
  trainer::save_history_csv(res.history, hist_path);

  Manifest mf("train");
  mf.add("seed", static_cast<std::int64_t>(cfg.seed));
  mf.add_input(o.cloud);
  if (!o.config.empty()) mf.add_input(o.config);
  mf.add_output(ckpt_path);
  mf.add_output(hist_path);
  std::istringstream snap(serialize_train_config(cfg));
  for (std::string line; std::getline(snap, line);)
    if (!line.empty()) mf.add("config." + line.substr(0, line.find(' ')),
                              line.substr(line.find("= ") + 2));
  mf.write(o.out, timer.seconds());
  std::cerr << "finished " << res.iteration << " iterations in " << fmt9(timer.seconds())
            << "s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string checkpoint;
  std::string gt;
  std::string out = ".";
  bool trace = false;
  std::uint64_t seed = 0;
  std::int64_t surface_samples = 2000;
};

int cmd_eval(const EvalOpts& o) {
  Timer timer;
  field::Checkpoint ck = field::load_checkpoint(o.checkpoint);
  ScalarGrid gt = geometry::load_grid(o.gt);
  if (ck.field.arch.input_dim != gt.dim)
    throw IncompatibleInput("checkpoint is " + std::to_string(ck.field.arch.input_dim) +
                            "D but ground-truth grid is " + std::to_string(gt.dim) + "D");
  if (gt.dim < 2) throw IncompatibleInput("evaluation requires a 2D or 3D grid");

  ScalarGrid pred = eval::grid_eval(ck.field, gt.lower, gt.upper, gt.res);

  eval::MetricsReport rep;
  rep.grid_res = gt.res[0];
  rep.iou = eval::iou(pred, gt);
  LevelSet lp = geometry::extract_level_set(pred);
  LevelSet lg = geometry::extract_level_set(gt);
  Eigen::MatrixXd sp = geometry::sample_level_set(lp, o.surface_samples,
                                                  substream_seed(o.seed, "eval-pred-surface", 0));
  Eigen::MatrixXd sg = geometry::sample_level_set(lg, o.surface_samples,
                                                  substream_seed(o.seed, "eval-gt-surface", 0));
  std::tie(rep.chamfer, rep.hausdorff) = eval::chamfer_hausdorff(sp, sg);
  rep.sdf = eval::sdf_metrics(pred, gt);

  fs::create_directories(fs::path(o.out) / "renders");
  std::vector<std::string> outputs;
  if (gt.dim == 2) {
    std::string hm = (fs::path(o.out) / "renders" / "heatmap.ppm").string();
    eval::write_heatmap_ppm(pred, hm);
    outputs.push_back(hm);
  }
  if (o.trace) {
    if (gt.dim != 3) throw IncompatibleInput("--trace requires a 3D checkpoint");
    eval::Camera cam;
    eval::TraceResult tr = eval::sphere_trace(ck.field, cam);
    rep.trace = eval::trace_stats(tr);
    std::string im = (fs::path(o.out) / "renders" / "iterations.ppm").string();
    eval::write_iteration_map_ppm(tr, im);
    outputs.push_back(im);
  }

  std::string metrics_path = (fs::path(o.out) / "metrics.csv").string();
  eval::write_metrics_csv(rep, metrics_path);
  std::string summary = eval::summary_line(rep);
  std::string summary_path = (fs::path(o.out) / "summary.txt").string();
  {
    std::ofstream out(summary_path);
    out << summary << "\n";
    if (!out) throw std::runtime_error("write failed: " + summary_path);
  }
  std::cout << summary << "\n";

  Manifest mf("eval");
  mf.add("seed", static_cast<std::int64_t>(o.seed));
  mf.add_input(o.checkpoint);
  mf.add_input(o.gt);
  mf.add_output(metrics_path);
  mf.add_output(summary_path);
  for (const auto& p : outputs) mf.add_output(p);
  mf.write(o.out, timer.seconds());
  return 0;
}

// ---------------------------------------------------------------------------
// trace

struct TraceOpts {
  std::string checkpoint;
  std::string out = ".";
  int poses = 10;
  double radius = 1.0;
  double height = 0.5;
  int res = 500;
  int max_steps = 30;
  double threshold = 5e-5;
};

int cmd_trace(const TraceOpts& o) {
  Timer timer;
  field::Checkpoint ck = field::load_checkpoint(o.checkpoint);
  if (ck.field.arch.input_dim != 3)
    throw IncompatibleInput("trace requires a 3D checkpoint, got " +
                            std::to_string(ck.field.arch.input_dim) + "D");
  fs::create_directories(fs::path(o.out) / "renders");

  std::vector<std::int64_t> agg_hist(static_cast<size_t>(o.max_steps) + 1, 0);
  std::vector<std::string> outputs;
  double mean_sum = 0, hit_sum = 0;
  for (int k = 0; k < o.poses; ++k) {
    double a = 2.0 * std::numbers::pi * k / o.poses;
    eval::Camera cam;
    cam.position = vec3(o.radius * std::cos(a), o.radius * std::sin(a), o.height);
    cam.width = cam.height = o.res;
    eval::TraceResult tr = eval::sphere_trace(ck.field, cam, o.max_steps, o.threshold);
    char tag[16];
    std::snprintf(tag, sizeof(tag), "pose%02d", k);
    std::string base = (fs::path(o.out) / "renders" / tag).string();
    eval::write_iteration_map_ppm(tr, base + "_iterations.ppm");
    eval::write_depth_map_ppm(tr, base + "_depth.ppm");
    eval::write_normal_map_ppm(tr, base + "_normals.ppm");
    outputs.push_back(base + "_iterations.ppm");
    outputs.push_back(base + "_depth.ppm");
    outputs.push_back(base + "_normals.ppm");
    for (int it : tr.iterations) ++agg_hist[static_cast<size_t>(it)];
    eval::TraceStats st = eval::trace_stats(tr);
    mean_sum += st.mean_iterations;
    hit_sum += st.hit_ratio;
    std::cout << "pose=" << k << " mean_iters=" << fmt9(st.mean_iterations)
              << " hit_ratio=" << fmt9(st.hit_ratio) << "\n";
  }
  std::string hist_path = (fs::path(o.out) / "renders" / "iterations_histogram.csv").string();
  {
    std::ofstream out(hist_path);
    out << "iterations,count\n";
    for (size_t i = 0; i < agg_hist.size(); ++i) out << i << "," << agg_hist[i] << "\n";
    if (!out) throw std::runtime_error("write failed: " + hist_path);
  }
  outputs.push_back(hist_path);
  std::cout << "aggregate mean_iters=" << fmt9(mean_sum / o.poses)
            << " hit_ratio=" << fmt9(hit_sum / o.poses) << "\n";

  Manifest mf("trace");
  mf.add_input(o.checkpoint);
  mf.add("poses", static_cast<std::int64_t>(o.poses));
  for (const auto& p : outputs) mf.add_output(p);
  mf.write(o.out, timer.seconds());
  return 0;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateOpts {
  std::string suite = "all";
  int configs = 20;
  std::uint64_t seed = 0;
};

bool validate_closed_forms() {
  // K0 against a reference value, then both FD solvers against the closed
  // forms they discretize.
  if (std::abs(oracles::bessel_k0(1.0) - 0.42102443824070834) > 1e-10) return false;
  const double lambda = 10, eps = 0.05;
  {
    std::vector<double> h = oracles::fd_radial_screened_poisson(eps, 6.0, 12001, lambda, 1.0, 3);
    double dr = (6.0 - eps) / 12000;
    for (int i = 0; i <= 12000; i += 50) {
      double r = eps + i * dr;
      if (r > 4.0) break;
      double ref = oracles::h_point_3d(r, eps, lambda);
      if (std::abs(h[static_cast<size_t>(i)] - ref) > 0.005 * ref) return false;
    }
  }
  {
    const int n = 201;
    const double ext = 1.2, cell = 2 * ext / n, eps2 = 0.15;
    Vec lo = vec2(-ext, -ext), hi = vec2(ext, ext);
    std::vector<std::uint8_t> mask(n * n, 0);
    std::vector<double> bv(n * n, 0.0);
    ScalarGrid spec_grid;
    spec_grid.dim = 2;
    spec_grid.lower = lo;
    spec_grid.upper = hi;
    spec_grid.res = {n, n, 1};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vec p = spec_grid.cell_center({i, j, 0});
        double r = p.norm();
        if (r <= eps2 + 2 * cell) {
          mask[static_cast<size_t>(i) * n + j] = 1;
          bv[static_cast<size_t>(i) * n + j] =
              oracles::h_point_2d(std::max(r, eps2), eps2, lambda);
        }
      }
    ScalarGrid h = oracles::fd_screened_poisson(lo, hi, {n, n, 1}, 2, mask, bv, lambda);
    for (int i = 0; i < n; i += 3)
      for (int j = 0; j < n; j += 3) {
        Vec p = h.cell_center({i, j, 0});
        double r = p.norm();
        if (r < eps2 + 5 * cell || r > 0.6) continue;
        double ref = oracles::h_point_2d(r, eps2, lambda);
        if (std::abs(h.values[static_cast<size_t>(i) * n + j] - ref) > 0.02 * ref) return false;
      }
  }
  return true;
}

Eigen::MatrixXd random_centers(int dim, std::int64_t n, double min_sep, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::MatrixXd c(dim, n);
  std::int64_t placed = 0;
  while (placed < n) {
    Vec p(dim);
    for (int a = 0; a < dim; ++a) p[a] = uni(rng);
    bool ok = true;
    for (std::int64_t j = 0; j < placed; ++j)
      if ((c.col(j) - p).norm() < min_sep) ok = false;
    if (ok) c.col(placed++) = p;
  }
  return c;
}

bool validate_bounds(int configs, std::uint64_t seed, std::ostream& log) {
  const double eps = 0.01;
  const double lambdas[] = {20, 40, 80};
  int pass = 0, total = 0;
  for (int t = 0; t < configs; ++t) {
    auto rng = substream(seed, "validate-bounds", static_cast<std::uint64_t>(t));
    std::uniform_int_distribution<int> nn(1, 20);
    std::int64_t n = nn(rng);
    Eigen::MatrixXd centers = random_centers(3, n, 3 * eps, rng);
    double lambda = lambdas[t % 3];
    oracles::PointSourceSystem sys = oracles::solve_multipoint(centers, eps, lambda);
    std::uniform_real_distribution<double> uni(-1.5, 1.5);
    Eigen::MatrixXd queries(3, 100);
    std::int64_t q = 0;
    while (q < 100) {
      Vec p = vec3(uni(rng), uni(rng), uni(rng));
      if (sys.min_center_distance(p) > 2.5 * eps) queries.col(q++) = p;
    }
    oracles::BoundReport rep = oracles::check_bounds(sys, queries);
    ++total;
    pass += rep.all_pass() ? 1 : 0;
  }
  log << "  bounds: " << pass << "/" << total << " configurations pass\n";
  if (pass != total) return false;
  // Deliberate violation: shift the recovered values past the upper bound.
  auto rng = substream(seed, "validate-bounds-violate");
  Eigen::MatrixXd centers = random_centers(3, 5, 0.03, rng);
  oracles::PointSourceSystem sys = oracles::solve_multipoint(centers, eps, 40);
  Eigen::MatrixXd queries(3, 10);
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  std::int64_t q = 0;
  while (q < 10) {
    Vec p = vec3(uni(rng), uni(rng), uni(rng));
    if (sys.min_center_distance(p) > 0.05) queries.col(q++) = p;
  }
  Eigen::VectorXd bogus(10);
  for (int i = 0; i < 10; ++i)
    bogus[i] = oracles::varadhan_recover(sys.heat(queries.col(i)), 40) + 1.0;
  return !oracles::check_bounds_values(sys, queries, bogus).all_pass();
}

bool validate_convergence(std::uint64_t seed) {
  auto rng = substream(seed, "validate-convergence");
  Eigen::MatrixXd centers = random_centers(3, 6, 0.1, rng);
  const double eps = 0.01;
  std::vector<Vec> queries = {vec3(1.2, 0.3, -0.4), vec3(-0.9, 1.1, 0.2), vec3(0.4, -1.3, 0.8)};
  for (const Vec& qp : queries) {
    std::vector<double> err;
    for (double lambda : {20.0, 40.0, 80.0, 160.0}) {
      oracles::PointSourceSystem sys = oracles::solve_multipoint(centers, eps, lambda);
      double d = sys.min_center_distance(qp);
      double u = oracles::varadhan_recover(sys.heat(qp), lambda);
      err.push_back(std::abs(d - u));
    }
    for (size_t k = 0; k + 1 < err.size(); ++k) {
      double ratio = err[k + 1] / err[k];
      if (ratio < 0.4 || ratio > 0.6) return false;
    }
  }
  return true;
}

bool validate_stability() {
  // Exact spectral ratios, grid CFL behavior, and eikonal anti-diffusion.
  for (double lambda : {0.0, 5.0, 30.0}) {
    oracles::StabilityConfig cfg;
    cfg.modes = {1, 4, 16, 64};
    cfg.lambda = lambda;
    cfg.dt = 1e-3;
    cfg.steps = 50;
    auto traj = oracles::stability_sim(cfg);
    for (size_t m = 0; m < cfg.modes.size(); ++m) {
      double w = cfg.modes[m];
      double expect = std::exp(-(w * w + lambda * lambda) * cfg.dt);
      for (size_t s = 0; s + 1 < traj[m].size(); ++s)
        if (std::abs(traj[m][s + 1] / traj[m][s] - expect) > 1e-12) return false;
    }
  }
  {
    const int n = 64;
    double dx = 2 * std::numbers::pi / n;
    double w_max = 2.0 / dx;
    double dt_crit = 2.0 / (w_max * w_max);
    auto stable = oracles::stability_sim_grid(8, 0.0, 0.9 * dt_crit, 300, n);
    if (stable.back() >= stable.front()) return false;
    auto unstable = oracles::stability_sim_grid(31, 0.0, 1.1 * dt_crit, 300, n);
    if (unstable.back() < 100) return false;
  }
  {
    oracles::StabilityConfig cfg;
    cfg.flow = oracles::FlowKind::Eikonal;
    cfg.kappa_e = -0.5;
    cfg.modes = {4};
    cfg.dt = 1e-3;
    cfg.steps = 50;
    auto traj = oracles::stability_sim(cfg);
    for (size_t s = 0; s + 1 < traj[0].size(); ++s)
      if (traj[0][s + 1] <= traj[0][s]) return false;
  }
  return true;
}

bool validate_autodiff(std::uint64_t seed, int nets, std::ostream& log) {
  int checked = 0;
  for (int t = 0; t < nets; ++t) {
    auto rng = substream(seed, "validate-autodiff", static_cast<std::uint64_t>(t));
    field::Architecture arch;
    arch.input_dim = 2 + t % 2;
    arch.hidden_layers = 3 + t % 3;
    arch.width = 16 + 8 * (t % 3);
    field::NeuralField f =
        field::init_random(arch, substream_seed(seed, "validate-autodiff-net", t));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::int64_t n = 5;
    Eigen::MatrixXd x(arch.input_dim, n);
    Eigen::RowVectorXd va(n);
    Eigen::MatrixXd ga(arch.input_dim, n);
    for (std::int64_t i = 0; i < n; ++i) {
      for (int a = 0; a < arch.input_dim; ++a) {
        x(a, i) = uni(rng);
        ga(a, i) = uni(rng);
      }
      va[i] = uni(rng);
    }
    Eigen::VectorXd g = field::param_gradient(f, x, va, ga);
    auto scalar_loss = [&] {
      field::EvalResult ev = field::forward_with_grad(f, x);
      double s = 0;
      for (std::int64_t i = 0; i < n; ++i)
        s += va[i] * ev.values[i] + ga.col(i).dot(ev.grads.col(i));
      return s;
    };
    const double h = 1e-6;
    for (std::int64_t p = 0; p < f.params.size(); p += 17) {
      double orig = f.params[p];
      f.params[p] = orig + h;
      double up = scalar_loss();
      f.params[p] = orig - h;
      double dn = scalar_loss();
      f.params[p] = orig;
      double fd = (up - dn) / (2 * h);
      double tol = std::max(1e-8, 1e-4 * std::max(std::abs(fd), std::abs(g[p])));
      if (std::abs(g[p] - fd) > tol) {
        log << "  autodiff: mismatch at net " << t << " param " << p << ": " << g[p] << " vs "
            << fd << "\n";
        return false;
      }
      ++checked;
    }
  }
  log << "  autodiff: " << checked << " parameter derivatives agree with finite differences\n";
  return true;
}

int cmd_validate(const ValidateOpts& o) {
  struct Check {
    std::string name;
    bool ran = false;
    bool pass = false;
  };
  std::vector<Check> checks;
  auto want = [&](const std::string& name) { return o.suite == "all" || o.suite == name; };
  auto run = [&](const std::string& name, auto fn) {
    if (!want(name)) return;
    Check c{name, true, false};
    c.pass = fn();
    checks.push_back(c);
  };
  run("closed_forms", [] { return validate_closed_forms(); });
  run("bounds", [&] { return validate_bounds(o.configs, o.seed, std::cout); });
  run("convergence", [&] { return validate_convergence(o.seed); });
  run("stability", [] { return validate_stability(); });
  run("autodiff", [&] { return validate_autodiff(o.seed, 5, std::cout); });
  if (checks.empty())
    throw CLI::ValidationError(
        "suite", "unknown suite '" + o.suite +
                     "'; known: closed_forms, bounds, convergence, stability, autodiff, all");
  bool all = true;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "[ ok ] " : "[fail] ") << c.name << "\n";
    all &= c.pass;
  }
  return all ? 0 : 1;
}

// ---------------------------------------------------------------------------
// demo1d

struct Demo1dOpts {
  std::string mode = "with_heat";
  std::string out = ".";
  std::uint64_t seed = 0;
  std::int64_t iterations = 0;  // 0: default budget
};

int cmd_demo1d(const Demo1dOpts& o) {
  Timer timer;
  trainer::Demo1dConfig cfg;
  cfg.seed = o.seed;
  if (o.iterations > 0) cfg.iterations = o.iterations;
  trainer::Demo1dMode mode;
  if (o.mode == "with_heat") mode = trainer::Demo1dMode::WithHeat;
  else if (o.mode == "eikonal_only") mode = trainer::Demo1dMode::EikonalOnly;
  else throw CLI::ValidationError("mode", "unknown mode '" + o.mode +
                                              "'; known: with_heat, eikonal_only");
  trainer::Demo1dResult res = trainer::demo_1d(mode, cfg);

  fs::create_directories(o.out);
  std::string curve_path = (fs::path(o.out) / "curve.csv").string();
  {
    std::ofstream out(curve_path);
    out << "x,u,u_ref\n";
    for (size_t k = 0; k < res.probe_x.size(); ++k)
      out << fmt9(res.probe_x[k]) << "," << fmt9(res.probe_u[k]) << "," << fmt9(res.probe_ref[k])
          << "\n";
    if (!out) throw std::runtime_error("write failed: " + curve_path);
  }
  std::string err_path = (fs::path(o.out) / "error_curve.csv").string();
  {
    std::ofstream out(err_path);
    out << "iteration,max_error\n";
    for (const auto& [it, e] : res.error_curve) out << it << "," << fmt9(e) << "\n";
    if (!out) throw std::runtime_error("write failed: " + err_path);
  }
  std::cout << "mode=" << o.mode << " final_max_error=" << fmt9(res.final_max_error) << "\n";

  Manifest mf("demo1d " + o.mode);
  mf.add("seed", static_cast<std::int64_t>(o.seed));
  mf.add("iterations", cfg.iterations);
  mf.add("final_max_error", res.final_max_error);
  mf.add_output(curve_path);
  mf.add_output(err_path);
  mf.write(o.out, timer.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hotspot: neural signed distance fields via a screened-Poisson heat loss"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (default: HOTSPOT_THREADS or all cores)");

  GenOpts gen;
  CLI::App* sub_gen = app.add_subcommand("gen", "generate a point cloud and ground-truth grid");
  sub_gen->add_option("shape", gen.shape, "shape name (circle, square, rings, star, sphere, torus)")
      ->required();
  sub_gen->add_option("--n", gen.n, "number of boundary points")->capture_default_str();
  sub_gen->add_option("--seed", gen.seed, "root seed")->capture_default_str();
  sub_gen->add_option("--out", gen.out, "output directory")->capture_default_str();
  sub_gen->add_option("--grid-res", gen.grid_res, "GT grid resolution per axis (0: default)")
      ->capture_default_str();
  sub_gen->add_option("--r", gen.r, "primary radius / half-extent")->capture_default_str();
  sub_gen->add_option("--inner", gen.inner, "rings inner radius")->capture_default_str();
  sub_gen->add_option("--star-inner", gen.star_inner, "star inner radius")->capture_default_str();
  sub_gen->add_option("--star-points", gen.star_points, "star point count")->capture_default_str();
  sub_gen->add_option("--torus-major", gen.torus_major, "torus ring radius")->capture_default_str();
  sub_gen->add_option("--torus-minor", gen.torus_minor, "torus tube radius")->capture_default_str();

  TrainOpts train;
  CLI::App* sub_train = app.add_subcommand("train", "fit a neural field to a point cloud");
  sub_train->add_option("--cloud", train.cloud, "point cloud file")
      ->required()
      ->check(CLI::ExistingFile);
  sub_train->add_option("--config", train.config, "key = value config file")
      ->check(CLI::ExistingFile);
  sub_train->add_option("--out", train.out, "output directory")->capture_default_str();
  sub_train->add_flag("--log-machine", train.log_machine, "machine-readable lines on stdout");
  sub_train->add_option("--iterations", train.iterations, "iteration budget")
      ->capture_default_str();
  sub_train->add_option("--lr", train.lr, "learning rate")->capture_default_str();
  sub_train->add_option("--seed", train.seed, "root seed")->capture_default_str();
  sub_train->add_option("--width", train.width, "hidden width")->capture_default_str();
  sub_train->add_option("--layers", train.layers, "hidden layer count")->capture_default_str();
  sub_train->add_option("--activation", train.activation, "softplus or sine")
      ->capture_default_str();
  sub_train->add_option("--act-param", train.act_param, "softplus beta / sine omega0")
      ->capture_default_str();
  sub_train->add_option("--n-uniform", train.n_uniform, "uniform volume samples per batch")
      ->capture_default_str();
  sub_train->add_option("--n-gauss", train.n_gauss, "Gaussian volume samples per batch")
      ->capture_default_str();
  sub_train->add_option("--sigma", train.sigma, "Gaussian sampling stddev")->capture_default_str();
  sub_train->add_option("--boundary-fraction", train.boundary_fraction,
                        "fraction of the cloud per boundary batch")
      ->capture_default_str();
  sub_train->add_option("--eval-interval", train.eval_interval, "history logging stride")
      ->capture_default_str();
  sub_train->add_option("--checkpoint-interval", train.checkpoint_interval,
                        "interval checkpoint stride (0: final only)")
      ->capture_default_str();
  sub_train->add_flag("--no-geometric-init", train.no_geometric_init,
                      "random instead of geometric initialization");
  sub_train->add_option("--init-radius", train.init_radius, "geometric init sphere radius")
      ->capture_default_str();

  EvalOpts eval_o;
  CLI::App* sub_eval = app.add_subcommand("eval", "metrics report for a trained checkpoint");
  sub_eval->add_option("--checkpoint", eval_o.checkpoint, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sub_eval->add_option("--gt", eval_o.gt, "ground-truth grid file")
      ->required()
      ->check(CLI::ExistingFile);
  sub_eval->add_option("--out", eval_o.out, "output directory")->capture_default_str();
  sub_eval->add_flag("--trace", eval_o.trace, "include sphere-tracing stats (3D only)");
  sub_eval->add_option("--seed", eval_o.seed, "root seed")->capture_default_str();
  sub_eval->add_option("--surface-samples", eval_o.surface_samples,
                       "level-set samples for Chamfer/Hausdorff")
      ->capture_default_str();

  TraceOpts trace;
  CLI::App* sub_trace = app.add_subcommand("trace", "sphere-trace a 3D checkpoint from a pose ring");
  sub_trace->add_option("--checkpoint", trace.checkpoint, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sub_trace->add_option("--out", trace.out, "output directory")->capture_default_str();
  sub_trace->add_option("--poses", trace.poses, "camera count on the ring")->capture_default_str();
  sub_trace->add_option("--radius", trace.radius, "pose ring radius")->capture_default_str();
  sub_trace->add_option("--height", trace.height, "pose ring height")->capture_default_str();
  sub_trace->add_option("--res", trace.res, "image resolution")->capture_default_str();
  sub_trace->add_option("--max-steps", trace.max_steps, "marching step cap")
      ->capture_default_str();
  sub_trace->add_option("--threshold", trace.threshold, "hit threshold")->capture_default_str();

  ValidateOpts val;
  CLI::App* sub_val = app.add_subcommand("validate", "run the theory validation suites");
  sub_val->add_option("suite", val.suite,
                      "closed_forms, bounds, convergence, stability, autodiff, or all")
      ->capture_default_str();
  sub_val->add_option("--configs", val.configs, "bound-checker configuration count")
      ->capture_default_str();
  sub_val->add_option("--seed", val.seed, "root seed")->capture_default_str();

  Demo1dOpts demo;
  CLI::App* sub_demo = app.add_subcommand("demo1d", "1D heat-loss demonstration");
  sub_demo->add_option("--mode", demo.mode, "with_heat or eikonal_only")->capture_default_str();
  sub_demo->add_option("--out", demo.out, "output directory")->capture_default_str();
  sub_demo->add_option("--seed", demo.seed, "root seed")->capture_default_str();
  sub_demo->add_option("--iterations", demo.iterations, "iteration budget (0: default)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    Eigen::setNbThreads(resolve_threads(threads));
    if (sub_gen->parsed()) return cmd_gen(gen);
    if (sub_train->parsed()) return cmd_train(sub_train, train);
    if (sub_eval->parsed()) return cmd_eval(eval_o);
    if (sub_trace->parsed()) return cmd_trace(trace);
    if (sub_val->parsed()) return cmd_validate(val);
    if (sub_demo->parsed()) return cmd_demo1d(demo);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const TrainingDivergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IncompatibleInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
