#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hotspot/eval.hpp"
#include "hotspot/geometry.hpp"
#include "hotspot/rng.hpp"
#include "hotspot/trainer.hpp"

using namespace hotspot;
namespace tr = hotspot::trainer;
namespace fld = hotspot::field;
namespace geo = hotspot::geometry;

namespace {

tr::TrainConfig small_config() {
  tr::TrainConfig cfg;
  cfg.arch.input_dim = 2;
  cfg.arch.width = 16;
  cfg.arch.hidden_layers = 2;
  cfg.iterations = 120;
  cfg.n_uniform = 128;
  cfg.n_gauss = 128;
  cfg.boundary_fraction = 0.3;
  cfg.lr = 1e-3;
  cfg.seed = 5;
  cfg.geometric_init = false;
  cfg.loss.w_boundary = losses::Schedule::constant(100.0);
  cfg.loss.w_eikonal = losses::Schedule::constant(1.0);
  cfg.loss.w_heat = losses::Schedule::constant(2.0);
  cfg.loss.lambda = losses::Schedule::constant(10.0);
  return cfg;
}

PointCloud circle_cloud(std::int64_t n = 300, std::uint64_t seed = 1) {
  return geo::sample_boundary(geo::make_circle(vec2(0, 0), 0.5), n, seed);
}

// One plain gradient step of the demo loss with the adjoints evaluated at the
// exact profile (not the net's own values), pushed through the net's
// parameter Jacobian. Returns the max probe-grid value change.
double one_step_probe_change(const std::function<double(double)>& prof, double lr) {
  fld::Architecture arch;
  arch.input_dim = 1;
  arch.width = 32;
  arch.hidden_layers = 3;
  fld::NeuralField f = fld::init_random(arch, 11);
  tr::fit_profile_1d(f, prof, 3000, 1024, 2e-3, 21);

  Eigen::MatrixXd px(1, 1001);
  for (int k = 0; k <= 1000; ++k) px(0, k) = -1.0 + 2.0 * k / 1000.0;
  Eigen::RowVectorXd u0 = fld::forward_batch(f, px);

  losses::LossConfig loss;
  loss.w_boundary = losses::Schedule::constant(100.0);
  loss.w_eikonal = losses::Schedule::constant(1.0);
  loss.w_heat = losses::Schedule::constant(8.0);
  loss.lambda = losses::Schedule::constant(5.0);
  Eigen::MatrixXd bpts(1, 2);
  bpts << -0.5, 0.5;
  losses::VolumeBatch vol = losses::sample_volume(vec1(-1.0), vec1(1.0), bpts, 256, 0, 0.5,
                                                  substream_seed(7, "volume-sampler", 0));
  fld::EvalResult ve;
  ve.values.resize(vol.points.cols());
  ve.grads.resize(1, vol.points.cols());
  const double h = 1e-6;
  for (std::int64_t k = 0; k < vol.points.cols(); ++k) {
    double x = vol.points(0, k);
    ve.values[k] = prof(x);
    ve.grads(0, k) = (prof(x + h) - prof(x - h)) / (2 * h);
  }
  Eigen::RowVectorXd bu(2);
  bu << prof(-0.5), prof(0.5);
  losses::TermInputs in;
  in.boundary_values = bu;
  in.volume_eval = &ve;
  in.volume = &vol;
  losses::LossBreakdown bd = losses::total_loss(in, loss, 0, 1);
  losses::Adjoints adj = losses::loss_adjoints(in, bd);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(f.params.size());
  Eigen::MatrixXd eg;
  fld::accumulate_param_gradient(f, bpts, adj.boundary_value_adjoints, eg, grad);
  fld::accumulate_param_gradient(f, vol.points, adj.volume_value_adjoints,
                                 adj.volume_grad_adjoints, grad);
  f.params -= lr * grad;
  Eigen::RowVectorXd u1 = fld::forward_batch(f, px);
  return (u1 - u0).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("train config validation") {
  tr::TrainConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());

  tr::TrainConfig bad = cfg;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.boundary_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.boundary_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_uniform = 0;
  bad.n_gauss = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  PointCloud cloud = circle_cloud(50);
  tr::TrainConfig mism = cfg;
  mism.arch.input_dim = 3;
  CHECK_THROWS_AS(tr::train(cloud, mism), std::invalid_argument);
  PointCloud empty;
  empty.points.resize(2, 0);
  CHECK_THROWS_AS(tr::train(empty, cfg), std::invalid_argument);
}

TEST_CASE("training is deterministic in the seed") {
  PointCloud cloud = circle_cloud(120, 2);
  tr::TrainConfig cfg = small_config();
  tr::TrainResult a = tr::train(cloud, cfg);
  tr::TrainResult b = tr::train(cloud, cfg);
  REQUIRE(a.field.params.size() == b.field.params.size());
  CHECK(a.field.params == b.field.params);
  CHECK(a.adam.m == b.adam.m);
  CHECK(a.adam.v == b.adam.v);
  REQUIRE(a.history.entries.size() == b.history.entries.size());
  for (size_t i = 0; i < a.history.entries.size(); ++i)
    CHECK(a.history.entries[i].loss.total == b.history.entries[i].loss.total);

  cfg.seed = 6;
  tr::TrainResult c = tr::train(cloud, cfg);
  CHECK(a.field.params != c.field.params);
}

TEST_CASE("resume reproduces the uninterrupted run bitwise") {
  PointCloud cloud = circle_cloud(120, 2);
  tr::TrainConfig cfg = small_config();
  cfg.iterations = 200;
  tr::TrainResult full = tr::train(cloud, cfg);

  tr::TrainConfig half = cfg;
  half.iterations = 100;
  tr::TrainResult first = tr::train(cloud, half);
  CHECK(first.iteration == 100);
  fld::Checkpoint ck{first.field, first.adam, first.iteration};
  tr::TrainResult second = tr::train(cloud, cfg, ck);

  CHECK(second.iteration == 200);
  CHECK(second.field.params == full.field.params);
  CHECK(second.adam.m == full.adam.m);
  CHECK(second.adam.v == full.adam.v);
  CHECK(second.adam.step == full.adam.step);
}

TEST_CASE("history logging edges") {
  PointCloud cloud = circle_cloud(80, 3);
  tr::TrainConfig cfg = small_config();
  cfg.iterations = 40;

  SUBCASE("interval larger than the run logs nothing") {
    cfg.eval_interval = 1000;
    std::ostringstream machine;
    cfg.machine_out = &machine;
    tr::TrainResult r = tr::train(cloud, cfg);
    CHECK(r.history.entries.empty());
    CHECK(machine.str().empty());
  }

  SUBCASE("zero interval disables logging") {
    cfg.eval_interval = 0;
    tr::TrainResult r = tr::train(cloud, cfg);
    CHECK(r.history.entries.empty());
  }

  SUBCASE("machine lines and csv match the history") {
    cfg.eval_interval = 10;
    std::ostringstream machine;
    cfg.machine_out = &machine;
    tr::TrainResult r = tr::train(cloud, cfg);
    REQUIRE(r.history.entries.size() == 4);
    std::istringstream lines(machine.str());
    int nlines = 0;
    for (std::string line; std::getline(lines, line); ++nlines) {
      CHECK(line.rfind("iter=", 0) == 0);
      CHECK(line.find(" total=") != std::string::npos);
      CHECK(line.find(" heat=") != std::string::npos);
      CHECK(line.find(" grad_norm=") != std::string::npos);
    }
    CHECK(nlines == 4);

    const std::string path = "/tmp/hotspot_history_test.csv";
    tr::save_history_csv(r.history, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "iteration,total,boundary,eikonal,heat,area,sal,lambda,w_boundary,w_eikonal,w_heat,"
          "w_area,w_sal,wall_clock,grad_norm");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 4);
    std::remove(path.c_str());
  }
}

TEST_CASE("interval checkpoints round-trip the trained state") {
  PointCloud cloud = circle_cloud(80, 3);
  tr::TrainConfig cfg = small_config();
  cfg.iterations = 120;
  cfg.checkpoint_interval = 60;
  std::string dir = "/tmp/hotspot_trainer_ckpt";
  std::filesystem::create_directories(dir);
  cfg.checkpoint_dir = dir;
  tr::TrainResult r = tr::train(cloud, cfg);
  fld::Checkpoint ck = fld::load_checkpoint(dir + "/model.ckpt");
  CHECK(ck.iteration == 120);
  CHECK(ck.field.params == r.field.params);
  REQUIRE(ck.adam.has_value());
  CHECK(ck.adam->m == r.adam.m);
  std::filesystem::remove_all(dir);
}

TEST_CASE("circle training reaches the oracle targets") {
  geo::Shape shape = geo::make_circle(vec2(0, 0), 0.5);
  PointCloud cloud = geo::sample_boundary(shape, 300, 1);
  tr::TrainConfig cfg = small_config();
  cfg.iterations = 2000;
  cfg.n_uniform = 256;
  cfg.n_gauss = 256;
  cfg.lr = 2e-3;
  cfg.seed = 3;
  cfg.geometric_init = true;
  cfg.eval_interval = 20;
  tr::TrainResult res = tr::train(cloud, cfg);

  REQUIRE(res.history.entries.size() == 100);
  CHECK(res.history.entries.back().loss.boundary < 1e-2);

  ScalarGrid pred = eval::grid_eval(res.field, vec2(-1.5, -1.5), vec2(1.5, 1.5), {128, 128, 1});
  ScalarGrid gt = geo::sdf_grid(shape, vec2(-1.5, -1.5), vec2(1.5, 1.5), {128, 128, 1});
  CHECK(eval::iou(pred, gt) >= 0.97);

  SUBCASE("history stays finite under the heat weight") {
    for (const auto& e : res.history.entries) {
      CHECK(std::isfinite(e.loss.total));
      CHECK(std::isfinite(e.loss.heat));
      CHECK(std::isfinite(e.grad_norm));
    }
  }

  SUBCASE("loss trend over the last tenth is non-increasing") {
    // Least-squares slope over the final 10 logged totals must not be
    // significantly positive (95% one-sided).
    size_t n = res.history.entries.size();
    std::vector<double> y;
    for (size_t i = n - 10; i < n; ++i) y.push_back(res.history.entries[i].loss.total);
    double k = static_cast<double>(y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < y.size(); ++i) {
      double x = static_cast<double>(i);
      sx += x;
      sy += y[i];
      sxx += x * x;
      sxy += x * y[i];
    }
    double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    double intercept = (sy - slope * sx) / k;
    double sse = 0;
    for (size_t i = 0; i < y.size(); ++i) {
      double r2 = y[i] - (intercept + slope * static_cast<double>(i));
      sse += r2 * r2;
    }
    double var_slope = (sse / (k - 2)) / (sxx - sx * sx / k);
    CHECK(slope <= 1.96 * std::sqrt(var_slope));
  }
}

TEST_CASE("divergence recovery aborts after the second failure") {
  PointCloud cloud = circle_cloud(80, 3);
  tr::TrainConfig cfg = small_config();
  cfg.iterations = 50;
  std::string dir = "/tmp/hotspot_diverge_ckpt";
  std::filesystem::create_directories(dir);
  cfg.checkpoint_dir = dir;
  std::ostringstream progress;
  cfg.progress_out = &progress;

  fld::NeuralField poisoned = fld::init_random(cfg.arch, 1);
  poisoned.params[3] = std::numeric_limits<double>::quiet_NaN();
  fld::Checkpoint bad{poisoned, std::nullopt, 0};

  CHECK_THROWS_WITH_AS(tr::train(cloud, cfg, bad), doctest::Contains("diverged twice"),
                       TrainingDivergence);
  CHECK(progress.str().find("divergence") != std::string::npos);
  // The last good state is checkpointed before aborting.
  fld::Checkpoint ck = fld::load_checkpoint(dir + "/model.ckpt");
  CHECK(ck.iteration == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pseudo profile shape") {
  CHECK(tr::pseudo_profile_1d(-0.5) == 0.0);
  CHECK(tr::pseudo_profile_1d(0.5) == 0.0);
  CHECK(tr::pseudo_profile_1d(0.0) == doctest::Approx(-0.05));
  CHECK(tr::pseudo_profile_1d(0.8) == doctest::Approx(0.3));
  // Unit slope away from the kinks, but not the signed distance inside.
  for (double x : {-0.9, -0.4, -0.1, 0.1, 0.4, 0.9}) {
    double d = (tr::pseudo_profile_1d(x + 1e-6) - tr::pseudo_profile_1d(x - 1e-6)) / 2e-6;
    CHECK(std::abs(std::abs(d) - 1.0) < 1e-6);
  }
  CHECK(std::abs(tr::pseudo_profile_1d(0.0) - (-0.5)) > 0.4);
}

TEST_CASE("demo 1d") {
  SUBCASE("fit_profile_1d requires a 1d field") {
    fld::Architecture arch;
    arch.input_dim = 2;
    arch.width = 8;
    arch.hidden_layers = 1;
    fld::NeuralField f = fld::init_random(arch, 1);
    CHECK_THROWS_AS(tr::fit_profile_1d(
                        f, [](double x) { return x; }, 1, 8, 1e-3, 0),
                    std::invalid_argument);
  }

  SUBCASE("heat mode converges where eikonal mode stalls") {
    tr::Demo1dConfig cfg;
    cfg.iterations = 1500;  // shortened from the default budget for test speed
    tr::Demo1dResult heat = tr::demo_1d(tr::Demo1dMode::WithHeat, cfg);
    tr::Demo1dResult eik = tr::demo_1d(tr::Demo1dMode::EikonalOnly, cfg);

    CHECK(heat.final_max_error < 0.05);
    CHECK(eik.final_max_error > heat.final_max_error);

    REQUIRE(heat.probe_x.size() == 1001);
    REQUIRE(heat.probe_u.size() == 1001);
    REQUIRE(heat.probe_ref.size() == 1001);
    CHECK(heat.probe_x.front() == doctest::Approx(-1.0));
    CHECK(heat.probe_x.back() == doctest::Approx(1.0));
    for (size_t k = 0; k < heat.probe_x.size(); k += 100)
      CHECK(heat.probe_ref[k] == doctest::Approx(std::abs(heat.probe_x[k]) - 0.5));

    REQUIRE(heat.error_curve.size() == static_cast<size_t>(cfg.iterations / 50));
    CHECK(heat.error_curve.back().second < heat.error_curve.front().second);
  }

  SUBCASE("the true distance is near-stationary under the heat objective") {
    double from_sdf = one_step_probe_change([](double x) { return std::abs(x) - 0.5; }, 1e-5);
    double from_pseudo = one_step_probe_change(tr::pseudo_profile_1d, 1e-5);
    CHECK(from_sdf < 1e-3);
    CHECK(from_pseudo > 2.0 * from_sdf);
  }
}
