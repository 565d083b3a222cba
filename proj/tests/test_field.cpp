#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "hotspot/field.hpp"
#include "hotspot/rng.hpp"

namespace fld = hotspot::field;
using hotspot::Vec;
using hotspot::vec1;
using hotspot::vec2;

namespace {

// Straight-line reference evaluator: plain scalar loops, no Eigen, no shared
// code with the library path.
double reference_forward(const fld::NeuralField& f, const std::vector<double>& x) {
  const auto& a = f.arch;
  std::vector<double> act(x);
  std::int64_t off = 0;
  for (int l = 0; l < a.hidden_layers; ++l) {
    int fan = (l == 0) ? a.input_dim : a.width;
    std::vector<double> next(static_cast<size_t>(a.width));
    for (int r = 0; r < a.width; ++r) {
      double z = 0;
      for (int c = 0; c < fan; ++c) z += f.params[off + static_cast<std::int64_t>(r) * fan + c] * act[static_cast<size_t>(c)];
      z += f.params[off + static_cast<std::int64_t>(a.width) * fan + r];
      if (a.activation == fld::Activation::Softplus) {
        double m = a.act_param * z;
        next[static_cast<size_t>(r)] = (std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)))) / a.act_param;
      } else {
        next[static_cast<size_t>(r)] = std::sin(a.act_param * z);
      }
    }
    off += static_cast<std::int64_t>(a.width) * fan + a.width;
    act = std::move(next);
  }
  int fan = (a.hidden_layers == 0) ? a.input_dim : a.width;
  double u = f.params[off + fan];
  for (int c = 0; c < fan; ++c) u += f.params[off + c] * act[static_cast<size_t>(c)];
  return u;
}

double adjoint_objective(const fld::NeuralField& f, const Eigen::MatrixXd& x,
                         const Eigen::RowVectorXd& va, const Eigen::MatrixXd& ga) {
  fld::EvalResult r = fld::forward_with_grad(f, x);
  double L = (va.array() * r.values.array()).sum();
  if (ga.size() > 0) L += (ga.array() * r.grads.array()).sum();
  return L;
}

}  // namespace

TEST_CASE("forward basics") {
  SUBCASE("zero parameters give zero output") {
    fld::Architecture a;
    a.input_dim = 2;
    a.width = 8;
    a.hidden_layers = 2;
    fld::NeuralField f = fld::make_field(a);
    CHECK(fld::forward(f, vec2(0.3, -0.7)) == 0.0);
  }

  SUBCASE("pure linear layer") {
    fld::Architecture a;
    a.input_dim = 2;
    a.hidden_layers = 0;
    fld::NeuralField f = fld::make_field(a);
    f.params << 1.0, 2.0, 0.5;
    CHECK(fld::forward(f, vec2(1, 1)) == doctest::Approx(3.5).epsilon(1e-15));
    fld::EvalResult r = fld::forward_with_grad(f, Eigen::MatrixXd(vec2(0.2, 0.8)));
    CHECK(r.grads(0, 0) == 1.0);
    CHECK(r.grads(1, 0) == 2.0);
  }

  SUBCASE("matches the straight-line reference evaluator") {
    for (auto act : {fld::Activation::Softplus, fld::Activation::Sine}) {
      fld::Architecture a;
      a.input_dim = 2;
      a.width = 16;
      a.hidden_layers = 3;
      a.activation = act;
      a.act_param = (act == fld::Activation::Softplus) ? 100.0 : 30.0;
      fld::NeuralField f = fld::init_random(a, 21);
      std::mt19937_64 rng(3);
      std::uniform_real_distribution<double> uni(-1, 1);
      for (int k = 0; k < 10; ++k) {
        double x0 = uni(rng), x1 = uni(rng);
        double got = fld::forward(f, vec2(x0, x1));
        double want = reference_forward(f, {x0, x1});
        CHECK(std::abs(got - want) < 1e-12);
      }
    }
  }
}

TEST_CASE("forward determinism and batch invariance") {
  fld::Architecture a;
  a.input_dim = 3;
  a.width = 32;
  a.hidden_layers = 4;
  fld::NeuralField f = fld::init_random(a, 77);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1, 1);
  Eigen::MatrixXd batch(3, 7);
  for (int i = 0; i < 7; ++i)
    for (int d = 0; d < 3; ++d) batch(d, i) = uni(rng);
  Eigen::RowVectorXd together = fld::forward_batch(f, batch);
  fld::EvalResult with_grad = fld::forward_with_grad(f, batch);
  for (int i = 0; i < 7; ++i) {
    double solo = fld::forward(f, Vec(batch.col(i)));
    CHECK(solo == together[i]);             // bitwise, batch composition free
    CHECK(with_grad.values[i] == together[i]);
  }
}

TEST_CASE("input gradients") {
  SUBCASE("one softplus unit at zero") {
    fld::Architecture a;
    a.input_dim = 1;
    a.width = 1;
    a.hidden_layers = 1;
    fld::NeuralField f = fld::make_field(a);
    f.params << 1.0, 0.0, 1.0, 0.0;  // W1 b1 w_out b_out
    fld::EvalResult r = fld::forward_with_grad(f, Eigen::MatrixXd(vec1(0.0)));
    CHECK(r.grads(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  }

  SUBCASE("matches central finite differences") {
    fld::Architecture a;
    a.input_dim = 2;
    a.width = 16;
    a.hidden_layers = 3;
    fld::NeuralField f = fld::init_random(a, 13);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> uni(-1, 1);
    const double h = 1e-6;
    for (int k = 0; k < 10; ++k) {
      Vec x = vec2(uni(rng), uni(rng));
      fld::EvalResult r = fld::forward_with_grad(f, Eigen::MatrixXd(x));
      for (int d = 0; d < 2; ++d) {
        Vec xp = x, xm = x;
        xp[d] += h;
        xm[d] -= h;
        double fd = (fld::forward(f, xp) - fld::forward(f, xm)) / (2 * h);
        CHECK(r.grads(d, 0) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("parameter gradients") {
  SUBCASE("zero adjoints give a zero gradient") {
    fld::Architecture a;
    a.input_dim = 2;
    a.width = 8;
    a.hidden_layers = 2;
    fld::NeuralField f = fld::init_random(a, 1);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 5);
    Eigen::VectorXd g = fld::param_gradient(f, x, Eigen::RowVectorXd::Zero(5),
                                            Eigen::MatrixXd::Zero(2, 5));
    CHECK(g.norm() == 0.0);
  }

  SUBCASE("linear net with gradient adjoint e1") {
    fld::Architecture a;
    a.input_dim = 2;
    a.hidden_layers = 0;
    fld::NeuralField f = fld::make_field(a);
    f.params << 0.3, -0.2, 0.1;
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 4);
    Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(2, 4);
    ga.row(0).setOnes();
    Eigen::VectorXd g = fld::param_gradient(f, x, Eigen::RowVectorXd::Zero(4), ga);
    CHECK(g[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
  }

  SUBCASE("full finite-difference sweep over 20 seeds") {
    for (auto act : {fld::Activation::Softplus, fld::Activation::Sine}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        fld::Architecture a;
        a.input_dim = 2;
        a.width = 6;
        a.hidden_layers = 3;
        a.activation = act;
        a.act_param = (act == fld::Activation::Softplus) ? 100.0 : 30.0;
        fld::NeuralField f = fld::init_random(a, seed);
        auto rng = hotspot::substream(seed, "fd-sweep");
        std::uniform_real_distribution<double> uni(-1, 1);
        Eigen::MatrixXd x(2, 3);
        Eigen::RowVectorXd va(3);
        Eigen::MatrixXd ga(2, 3);
        for (int i = 0; i < 3; ++i) {
          x(0, i) = uni(rng);
          x(1, i) = uni(rng);
          va[i] = uni(rng);
          ga(0, i) = uni(rng);
          ga(1, i) = uni(rng);
        }
        Eigen::VectorXd g = fld::param_gradient(f, x, va, ga);
        const double h = 1e-6;
        for (std::int64_t p = 0; p < f.params.size(); ++p) {
          fld::NeuralField fp = f, fm = f;
          fp.params[p] += h;
          fm.params[p] -= h;
          double fd = (adjoint_objective(fp, x, va, ga) - adjoint_objective(fm, x, va, ga)) / (2 * h);
          double err = std::abs(g[p] - fd);
          CHECK(err < std::max(1e-8, 1e-4 * std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("geometric initialization") {
  fld::Architecture a;
  a.input_dim = 2;
  a.width = 32;
  a.hidden_layers = 3;
  fld::NeuralField f = fld::init_geometric(a, 0.5, 3);
  CHECK(fld::forward(f, vec2(0, 0)) < 0.0);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(-1, 1);
  double on_circle = 0;
  for (int k = 0; k < 100; ++k) {
    double th = 2 * 3.14159265358979 * k / 100;
    on_circle += std::abs(fld::forward(f, vec2(0.5 * std::cos(th), 0.5 * std::sin(th))));
  }
  CHECK(on_circle / 100 < 0.1);

  int agree = 0;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    Vec x = vec2(uni(rng), uni(rng));
    double u0 = x.norm() - 0.5;
    double u = fld::forward(f, x);
    if ((u < 0) == (u0 < 0)) ++agree;
    sx += u;
    sy += u0;
    sxy += u * u0;
    sxx += u * u;
    syy += u0 * u0;
  }
  CHECK(agree >= 900);
  double corr = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(corr >= 0.9);
}

TEST_CASE("adam optimizer") {
  SUBCASE("zero gradient is a fixed point") {
    fld::AdamState s = fld::make_adam(3, 1e-2);
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, 1.5);
    Eigen::VectorXd before = theta;
    fld::adam_step(s, theta, Eigen::VectorXd::Zero(3));
    CHECK(theta == before);
    CHECK(s.m.norm() == 0.0);
    CHECK(s.v.norm() == 0.0);
  }

  SUBCASE("first step moves by lr") {
    fld::AdamState s = fld::make_adam(1, 1e-3);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 7.3);
    fld::adam_step(s, theta, g);
    CHECK(std::abs(theta[0]) == doctest::Approx(1e-3).epsilon(1e-6));
  }

  SUBCASE("10-step trajectory on f(x) = x^2 matches a hand reference") {
    // Hand-rolled reference computed independently inside the test.
    double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double rx = 1.0, rm = 0, rv = 0;
    fld::AdamState s = fld::make_adam(1, lr, b1, b2, eps);
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 1.0);
    for (int t = 1; t <= 10; ++t) {
      double rg = 2.0 * rx;
      rm = b1 * rm + (1 - b1) * rg;
      rv = b2 * rv + (1 - b2) * rg * rg;
      rx -= lr * (rm / (1 - std::pow(b1, t))) / (std::sqrt(rv / (1 - std::pow(b2, t))) + eps);
      Eigen::VectorXd g = 2.0 * theta;
      fld::adam_step(s, theta, g);
      CHECK(std::abs(theta[0] - rx) < 1e-10);
    }
  }

  SUBCASE("non-finite gradient raises divergence") {
    fld::AdamState s = fld::make_adam(1, 1e-3);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd g = Eigen::VectorXd::Constant(1, std::nan(""));
    CHECK_THROWS_AS(fld::adam_step(s, theta, g), hotspot::TrainingDivergence);
  }
}

TEST_CASE("checkpoint round trip") {
  fld::Architecture a;
  a.input_dim = 2;
  a.width = 12;
  a.hidden_layers = 2;
  fld::Checkpoint ck;
  ck.field = fld::init_random(a, 99);
  ck.adam = fld::make_adam(ck.field.params.size(), 3e-4);
  ck.adam->m.setRandom();
  ck.adam->v = ck.adam->v.setRandom().cwiseAbs();
  ck.adam->step = 17;
  ck.iteration = 1234;
  const char* path = "tmp_ckpt.bin";
  fld::save_checkpoint(ck, path);
  fld::Checkpoint back = fld::load_checkpoint(path);
  CHECK(back.field.params == ck.field.params);
  CHECK(back.field.arch.width == 12);
  CHECK(back.adam.has_value());
  CHECK(back.adam->m == ck.adam->m);
  CHECK(back.adam->v == ck.adam->v);
  CHECK(back.adam->step == 17);
  CHECK(back.iteration == 1234);

  SUBCASE("corrupt magic is rejected") {
    std::fstream fix(path, std::ios::in | std::ios::out | std::ios::binary);
    fix.seekp(0);
    fix.put('X');
    fix.close();
    CHECK_THROWS_AS(fld::load_checkpoint(path), hotspot::ParseError);
  }

  SUBCASE("unknown version is refused") {
    fld::save_checkpoint(ck, path);
    std::fstream fix(path, std::ios::in | std::ios::out | std::ios::binary);
    fix.seekp(8);
    fix.put(static_cast<char>(9));
    fix.close();
    CHECK_THROWS_WITH_AS(fld::load_checkpoint(path), doctest::Contains("version"),
                         hotspot::ParseError);
  }

  std::remove(path);
}

TEST_CASE("fitted norm field has near-unit gradients") {
  fld::Architecture a;
  a.input_dim = 2;
  a.width = 32;
  a.hidden_layers = 3;
  fld::NeuralField f = fld::init_geometric(a, 0.5, 7, 1500, 2000, 2e-3);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> uni(-1, 1);
  int ok = 0, total = 0;
  while (total < 200) {
    Vec x = vec2(uni(rng), uni(rng));
    double r = x.norm();
    if (r < 0.2 || r > 1.0) continue;
    ++total;
    fld::EvalResult e = fld::forward_with_grad(f, Eigen::MatrixXd(x));
    double gn = e.grads.col(0).norm();
    if (gn >= 0.9 && gn <= 1.1) ++ok;
  }
  CHECK(ok >= 190);
}
