#include "hotspot/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "hotspot/rng.hpp"

namespace hotspot::trainer {

void TrainConfig::validate() const {
  if (iterations <= 0) throw std::invalid_argument("iterations must be positive");
  if (!(boundary_fraction > 0 && boundary_fraction <= 1))
    throw std::invalid_argument("boundary_fraction must be in (0, 1]");
  if (n_uniform < 0 || n_gauss < 0 || n_uniform + n_gauss == 0)
    throw std::invalid_argument("need a nonempty volume batch");
  if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
  if (lr <= 0) throw std::invalid_argument("lr must be positive");
  loss.validate();
  arch.validate();
}

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double schedule_max(const losses::Schedule& s) {
  double m = 0;
  for (auto& [t, v] : s.knots) m = std::max(m, std::abs(v));
  return m;
}

std::vector<std::int64_t> draw_batch(std::int64_t n, std::int64_t k, std::mt19937_64& rng) {
  // Partial Fisher-Yates over an index array.
  std::vector<std::int64_t> idx(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (std::int64_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, n - 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(pick(rng))]);
  }
  idx.resize(static_cast<size_t>(k));
  return idx;
}

}  // namespace

TrainResult train(const PointCloud& cloud, const TrainConfig& config,
                  const std::optional<field::Checkpoint>& resume) {
  config.validate();
  const int d = cloud.dim();
  if (config.arch.input_dim != d) throw std::invalid_argument("cloud/architecture dim mismatch");
  if (cloud.size() == 0) throw std::invalid_argument("empty point cloud");

  Vec box_lo = config.box_lower, box_hi = config.box_upper;
  if (box_lo.size() != d) box_lo = Vec::Constant(d, -1.5);
  if (box_hi.size() != d) box_hi = Vec::Constant(d, 1.5);

  TrainResult res;
  if (resume) {
    res.field = resume->field;
    res.adam = resume->adam ? *resume->adam
                            : field::make_adam(res.field.params.size(), config.lr, config.beta1,
                                               config.beta2, config.adam_eps);
    res.iteration = resume->iteration;
  } else {
    std::uint64_t init_seed = substream_seed(config.seed, "init", 0);
    res.field = config.geometric_init
                    ? field::init_geometric(config.arch, config.init_radius, init_seed)
                    : field::init_random(config.arch, init_seed);
    res.adam = field::make_adam(res.field.params.size(), config.lr, config.beta1, config.beta2,
                                config.adam_eps);
    res.iteration = 0;
  }

  const std::int64_t n = cloud.size();
  const std::int64_t nb = std::clamp<std::int64_t>(
      static_cast<std::int64_t>(std::llround(config.boundary_fraction * n)), 1, n);
  const bool use_sal = schedule_max(config.loss.w_sal) > 0;

  struct Snapshot {
    Eigen::VectorXd params;
    field::AdamState adam;
    std::int64_t iteration = 0;
  };
  Snapshot good{res.field.params, res.adam, res.iteration};
  bool retried = false;

  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto save_interval_ckpt = [&](std::int64_t iter) {
    if (config.checkpoint_dir.empty()) return;
    field::Checkpoint ck{res.field, res.adam, iter};
    field::save_checkpoint(ck, config.checkpoint_dir + "/model.ckpt");
  };
  auto recover = [&](const std::string& why) {
    if (retried) {
      save_interval_ckpt(good.iteration);
      throw TrainingDivergence("training diverged twice (" + why + "), last good iteration " +
                               std::to_string(good.iteration));
    }
    retried = true;
    res.field.params = good.params;
    res.adam = good.adam;
    res.adam.lr *= 0.5;
    res.iteration = good.iteration;
    if (config.progress_out)
      *config.progress_out << "divergence at " << why << ", restored iteration "
                           << good.iteration << " with lr " << res.adam.lr << "\n";
  };

  Eigen::MatrixXd empty_grads;
  Eigen::VectorXd grad(res.field.params.size());
  const std::int64_t progress_stride = std::max<std::int64_t>(1, config.iterations / 20);

  while (res.iteration < config.iterations) {
    const std::int64_t i = res.iteration;
    if (i % 100 == 0 && !retried) good = {res.field.params, res.adam, i};

    auto brng = substream(config.seed, "boundary-batch", static_cast<std::uint64_t>(i));
    std::vector<std::int64_t> bidx = draw_batch(n, nb, brng);
    Eigen::MatrixXd bpts(d, nb);
    for (std::int64_t k = 0; k < nb; ++k) bpts.col(k) = cloud.points.col(bidx[static_cast<size_t>(k)]);

    losses::VolumeBatch vol = losses::sample_volume(
        box_lo, box_hi, bpts, config.n_uniform, config.n_gauss, config.sigma,
        substream_seed(config.seed, "volume-sampler", static_cast<std::uint64_t>(i)));

    Eigen::RowVectorXd bu = field::forward_batch(res.field, bpts);
    field::EvalResult ve = field::forward_with_grad(res.field, vol.points);

    losses::TermInputs in;
    in.boundary_values = bu;
    in.volume_eval = &ve;
    in.volume = &vol;
    Eigen::VectorXd sal_d;
    if (use_sal) {
      sal_d = losses::cloud_distance(vol.points, cloud.points);
      in.sal_distances = &sal_d;
      in.sal_values = &ve.values;
    }

    losses::LossBreakdown bd = losses::total_loss(in, config.loss, i, config.iterations);
    if (!std::isfinite(bd.total)) {
      recover("iteration " + std::to_string(i) + ", non-finite loss");
      continue;
    }

    losses::Adjoints adj = losses::loss_adjoints(in, bd);
    grad.setZero();
    field::accumulate_param_gradient(res.field, bpts, adj.boundary_value_adjoints, empty_grads,
                                     grad);
    field::accumulate_param_gradient(res.field, vol.points, adj.volume_value_adjoints,
                                     adj.volume_grad_adjoints, grad);
    double gn = grad.norm();
    if (!std::isfinite(gn)) {
      recover("iteration " + std::to_string(i) + ", non-finite gradient");
      continue;
    }
    try {
      field::adam_step(res.adam, res.field.params, grad);
    } catch (const TrainingDivergence&) {
      recover("iteration " + std::to_string(i) + ", optimizer rejected gradient");
      continue;
    }
    res.iteration = i + 1;

    if (config.eval_interval > 0 && res.iteration % config.eval_interval == 0) {
      HistoryEntry e;
      e.iteration = res.iteration;
      e.loss = bd;
      e.wall_clock = elapsed();
      e.grad_norm = gn;
      res.history.entries.push_back(e);
      if (config.machine_out)
        *config.machine_out << "iter=" << res.iteration << " total=" << fmt9(bd.total)
                            << " boundary=" << fmt9(bd.boundary)
                            << " eikonal=" << fmt9(bd.eikonal) << " heat=" << fmt9(bd.heat)
                            << " area=" << fmt9(bd.area) << " sal=" << fmt9(bd.sal)
                            << " lambda=" << fmt9(bd.lambda) << " grad_norm=" << fmt9(gn)
                            << "\n";
    }
    if (config.checkpoint_interval > 0 && res.iteration % config.checkpoint_interval == 0)
      save_interval_ckpt(res.iteration);
    if (config.progress_out && res.iteration % progress_stride == 0)
      *config.progress_out << "[" << res.iteration << "/" << config.iterations
                           << "] total=" << fmt9(bd.total) << " elapsed=" << fmt9(elapsed())
                           << "s\n";
  }
  return res;
}

void save_history_csv(const TrainHistory& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iteration,total,boundary,eikonal,heat,area,sal,lambda,w_boundary,w_eikonal,w_heat,"
         "w_area,w_sal,wall_clock,grad_norm\n";
  for (const auto& e : h.entries) {
    out << e.iteration << "," << fmt9(e.loss.total) << "," << fmt9(e.loss.boundary) << ","
        << fmt9(e.loss.eikonal) << "," << fmt9(e.loss.heat) << "," << fmt9(e.loss.area) << ","
        << fmt9(e.loss.sal) << "," << fmt9(e.loss.lambda) << "," << fmt9(e.loss.w_boundary)
        << "," << fmt9(e.loss.w_eikonal) << "," << fmt9(e.loss.w_heat) << ","
        << fmt9(e.loss.w_area) << "," << fmt9(e.loss.w_sal) << "," << fmt9(e.wall_clock) << ","
        << fmt9(e.grad_norm) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

double pseudo_profile_1d(double x) {
  double a = std::abs(x);
  if (a >= 0.5) return a - 0.5;
  return -std::min(0.5 - a, a + 0.05);
}

void fit_profile_1d(field::NeuralField& f, const std::function<double(double)>& profile,
                    std::int64_t steps, std::int64_t samples, double lr, std::uint64_t seed) {
  if (f.arch.input_dim != 1) throw std::invalid_argument("1D field required");
  field::AdamState adam = field::make_adam(f.params.size(), lr);
  Eigen::MatrixXd x(1, samples);
  Eigen::RowVectorXd target(samples);
  Eigen::MatrixXd empty_grads;
  Eigen::VectorXd grad(f.params.size());
  for (std::int64_t s = 0; s < steps; ++s) {
    auto rng = substream(seed, "profile-fit", static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (std::int64_t k = 0; k < samples; ++k) {
      x(0, k) = uni(rng);
      target[k] = profile(x(0, k));
    }
    Eigen::RowVectorXd u = field::forward_batch(f, x);
    Eigen::RowVectorXd adj = (2.0 / samples) * (u - target);
    grad.setZero();
    field::accumulate_param_gradient(f, x, adj, empty_grads, grad);
    field::adam_step(adam, f.params, grad);
  }
}

Demo1dResult demo_1d(Demo1dMode mode, const Demo1dConfig& cfg) {
  field::Architecture arch;
  arch.input_dim = 1;
  arch.width = cfg.width;
  arch.hidden_layers = cfg.hidden_layers;

  field::NeuralField f = field::init_random(arch, substream_seed(cfg.seed, "demo-init", 0));
  if (cfg.adversarial_init)
    fit_profile_1d(f, pseudo_profile_1d, cfg.init_steps, 1024, 2e-3, cfg.seed);

  losses::LossConfig loss;
  loss.w_boundary = losses::Schedule::constant(cfg.w_boundary);
  loss.w_eikonal = losses::Schedule::constant(cfg.w_eikonal);
  loss.w_heat =
      losses::Schedule::constant(mode == Demo1dMode::WithHeat ? cfg.w_heat : 0.0);
  loss.lambda = losses::Schedule::constant(cfg.lambda);

  Eigen::MatrixXd bpts(1, 2);
  bpts << -0.5, 0.5;
  Vec lo = vec1(-1.0), hi = vec1(1.0);

  auto reference = [](double x) { return std::abs(x) - 0.5; };
  // Kinks of the reference and of the adversarial profile.
  const double kinks[] = {0.0, 0.225, 0.5};
  std::vector<double> probe_x;
  std::vector<bool> included;
  for (int k = 0; k <= 1000; ++k) {
    double x = -1.0 + 2.0 * k / 1000.0;
    probe_x.push_back(x);
    bool inc = true;
    for (double kk : kinks)
      if (std::abs(std::abs(x) - kk) < 0.05) inc = false;
    included.push_back(inc);
  }
  auto probe_error = [&] {
    Eigen::MatrixXd px(1, static_cast<std::int64_t>(probe_x.size()));
    for (size_t k = 0; k < probe_x.size(); ++k) px(0, static_cast<std::int64_t>(k)) = probe_x[k];
    Eigen::RowVectorXd u = field::forward_batch(f, px);
    double mx = 0;
    for (size_t k = 0; k < probe_x.size(); ++k)
      if (included[k])
        mx = std::max(mx, std::abs(u[static_cast<std::int64_t>(k)] - reference(probe_x[k])));
    return mx;
  };

  field::AdamState adam = field::make_adam(f.params.size(), cfg.lr);
  Eigen::MatrixXd empty_grads;
  Eigen::VectorXd grad(f.params.size());
  Demo1dResult res;
  for (std::int64_t i = 0; i < cfg.iterations; ++i) {
    losses::VolumeBatch vol = losses::sample_volume(
        lo, hi, bpts, 256, 0, 0.5, substream_seed(cfg.seed, "demo-volume", static_cast<std::uint64_t>(i)));
    Eigen::RowVectorXd bu = field::forward_batch(f, bpts);
    field::EvalResult ve = field::forward_with_grad(f, vol.points);
    losses::TermInputs in;
    in.boundary_values = bu;
    in.volume_eval = &ve;
    in.volume = &vol;
    losses::LossBreakdown bd = losses::total_loss(in, loss, i, cfg.iterations);
    losses::Adjoints adj = losses::loss_adjoints(in, bd);
    grad.setZero();
    field::accumulate_param_gradient(f, bpts, adj.boundary_value_adjoints, empty_grads, grad);
    field::accumulate_param_gradient(f, vol.points, adj.volume_value_adjoints,
                                     adj.volume_grad_adjoints, grad);
    field::adam_step(adam, f.params, grad);
    if ((i + 1) % 50 == 0) res.error_curve.emplace_back(i + 1, probe_error());
  }

  res.final_max_error = probe_error();
  Eigen::MatrixXd px(1, static_cast<std::int64_t>(probe_x.size()));
  for (size_t k = 0; k < probe_x.size(); ++k) px(0, static_cast<std::int64_t>(k)) = probe_x[k];
  Eigen::RowVectorXd u = field::forward_batch(f, px);
  res.probe_x = probe_x;
  for (size_t k = 0; k < probe_x.size(); ++k) {
    res.probe_u.push_back(u[static_cast<std::int64_t>(k)]);
    res.probe_ref.push_back(reference(probe_x[k]));
  }
  res.field = std::move(f);
  return res;
}

}  // namespace hotspot::trainer
