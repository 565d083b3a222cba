#include "hotspot/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace hotspot::oracles {

double h_point_3d(double r, double eps, double lambda, double h0) {
  if (eps <= 0) throw std::invalid_argument("eps must be positive");
  if (r < eps) throw std::invalid_argument("r must be >= eps");
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  return (eps / r) * h0 * std::exp(lambda * (eps - r));
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double bessel_k0(double x) {
  if (x <= 0) throw std::domain_error("bessel_k0 requires x > 0");
  if (x >= 740.0) return 0.0;  // below double underflow
  // exp(-x cosh t) is negligible once x cosh t exceeds ~ x + 745.
  double tmax = std::acosh((x + 745.0) / x);
  auto f = [x](double t) { return std::exp(-x * std::cosh(t)); };
  // Scale-aware tolerance: result is of order exp(-x).
  double tol = 1e-12 * std::exp(-x) * std::max(1.0, tmax);
  return integrate(f, 0.0, tmax, tol);
}

double h_point_2d(double r, double eps, double lambda) {
  if (eps <= 0) throw std::invalid_argument("eps must be positive");
  if (r < eps) throw std::invalid_argument("r must be >= eps");
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
  return std::exp(-lambda * eps) / bessel_k0(lambda * eps) * bessel_k0(lambda * r);
}

double PointSourceSystem::heat(const Vec& x) const {
  double acc = 0;
  double bv = std::exp(-lambda * eps);
  for (std::int64_t i = 0; i < size(); ++i) {
    double r = (x - centers.col(i)).norm();
    double hi;
    if (r <= eps) {
      hi = bv;
    } else if (dim() == 3) {
      hi = h_point_3d(r, eps, lambda, bv);
    } else {
      hi = h_point_2d(r, eps, lambda);
    }
    acc += coefficients[i] * hi;
  }
  return acc;
}

double PointSourceSystem::min_center_distance(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < size(); ++i) d = std::min(d, (x - centers.col(i)).norm());
  return d;
}

PointSourceSystem solve_multipoint(const Eigen::MatrixXd& centers, double eps, double lambda) {
  const std::int64_t n = centers.cols();
  const int d = static_cast<int>(centers.rows());
  if (d != 2 && d != 3) throw std::invalid_argument("multipoint system needs dim 2 or 3");
  if (n < 1 || n > 1000) throw std::invalid_argument("N must be in [1, 1000]");
  if (eps <= 0 || lambda <= 0) throw std::invalid_argument("eps and lambda must be positive");
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j)
      if ((centers.col(i) - centers.col(j)).norm() <= 2.0 * eps)
        throw std::invalid_argument("center spacing must exceed 2 eps");

  const double bv = std::exp(-lambda * eps);
  Eigen::MatrixXd H(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (i == j) {
        H(i, j) = bv;
      } else {
        double r = (centers.col(i) - centers.col(j)).norm();
        H(i, j) = (d == 3) ? h_point_3d(r, eps, lambda, bv) : h_point_2d(r, eps, lambda);
      }
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, bv);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(H);
  double rc = lu.rcond();
  if (!(rc > 1e-14))
    throw NumericalError("ill-conditioned multipoint system, rcond estimate " + std::to_string(rc));
  Eigen::VectorXd c = lu.solve(rhs);
  double resid = (H * c - rhs).lpNorm<Eigen::Infinity>();
  if (resid >= 1e-10 * bv)
    throw NumericalError("multipoint solve residual " + std::to_string(resid) + " too large");

  PointSourceSystem sys;
  sys.centers = centers;
  sys.eps = eps;
  sys.lambda = lambda;
  sys.coefficients = std::move(c);
  return sys;
}

double varadhan_recover(double h, double lambda) {
  if (h <= 0) throw std::domain_error("varadhan recovery requires h > 0");
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
  return -std::log(h) / lambda;
}

ScalarGrid varadhan_recover(const ScalarGrid& h, double lambda) {
  ScalarGrid out = h;
  for (auto& v : out.values) v = varadhan_recover(v, lambda);
  return out;
}

bool BoundReport::all_pass() const {
  for (const auto& e : entries)
    if (!e.pass) return false;
  return true;
}

namespace {

BoundReport bounds_impl(const PointSourceSystem& sys, const Eigen::MatrixXd& queries,
                        const Eigen::VectorXd* u_override) {
  if (queries.rows() != sys.dim()) throw std::invalid_argument("query dimension mismatch");
  BoundReport rep;
  rep.tolerance = std::max(1e-9, 2.0 * sys.eps);
  double lnN = std::log(static_cast<double>(sys.size()));
  for (std::int64_t i = 0; i < queries.cols(); ++i) {
    Vec x = queries.col(i);
    double dg = sys.min_center_distance(x);
    if (dg <= 2.0 * sys.eps)
      throw std::invalid_argument("query inside or too close to a source ball");
    BoundEntry e;
    e.d_gamma = dg;
    e.u_abs = u_override ? (*u_override)[i] : varadhan_recover(sys.heat(x), sys.lambda);
    e.lower = std::log(sys.eps / dg) / sys.lambda;
    e.upper = e.lower + lnN / sys.lambda;
    double gap = dg - e.u_abs;
    e.pass = (gap >= e.lower - rep.tolerance) && (gap <= e.upper + rep.tolerance);
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace

BoundReport check_bounds(const PointSourceSystem& system, const Eigen::MatrixXd& queries) {
  return bounds_impl(system, queries, nullptr);
}

BoundReport check_bounds_values(const PointSourceSystem& system, const Eigen::MatrixXd& queries,
                                const Eigen::VectorXd& u_abs_values) {
  if (u_abs_values.size() != queries.cols()) throw std::invalid_argument("value count mismatch");
  return bounds_impl(system, queries, &u_abs_values);
}

ScalarGrid fd_screened_poisson(const Vec& lower, const Vec& upper, const std::array<int, 3>& res,
                               int dim, const std::vector<std::uint8_t>& boundary_mask,
                               const std::vector<double>& boundary_values, double lambda,
                               double tol, int max_iters) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("dim must be 1..3");
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  ScalarGrid g;
  g.dim = dim;
  g.lower = lower;
  g.upper = upper;
  g.res = res;
  std::int64_t total = g.cell_count();
  if (boundary_mask.size() != static_cast<size_t>(total) ||
      boundary_values.size() != static_cast<size_t>(total))
    throw std::invalid_argument("mask/value size mismatch");
  bool any_mask = false;
  for (auto m : boundary_mask) any_mask |= (m != 0);
  if (!any_mask) throw std::invalid_argument("empty boundary mask");

  // Grid spacing per axis; strides for neighbor lookup in the flat layout.
  double h2inv[3];
  std::int64_t stride[3];
  for (int a = dim - 1, s = 1; a >= 0; --a) {
    stride[a] = s;
    s *= res[a];
  }
  for (int a = 0; a < dim; ++a) {
    double h = (upper[a] - lower[a]) / res[a];
    h2inv[a] = 1.0 / (h * h);
  }

  // Dirichlet cells: the mask, plus the outermost layer at value 0 (the
  // decay-at-infinity proxy), with the mask taking precedence.
  std::vector<double> dirichlet(total, 0.0);
  std::vector<std::uint8_t> fixed(total, 0);
  std::array<int, 3> idx{0, 0, 0};
  for (std::int64_t f = 0; f < total; ++f) {
    std::int64_t rem = f;
    for (int a = dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % res[a]);
      rem /= res[a];
    }
    bool edge = false;
    for (int a = 0; a < dim; ++a) edge |= (idx[a] == 0 || idx[a] == res[a] - 1);
    if (boundary_mask[static_cast<size_t>(f)]) {
      fixed[f] = 1;
      dirichlet[f] = boundary_values[static_cast<size_t>(f)];
    } else if (edge) {
      fixed[f] = 1;
      dirichlet[f] = 0.0;
    }
  }

  // A x = b with A = -Laplacian + lambda^2 I restricted to free cells,
  // Dirichlet contributions folded into b. Matrix-free CG.
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out, bool rhs_mode,
                   std::vector<double>* b) {
    for (std::int64_t f = 0; f < total; ++f) {
      if (fixed[f]) {
        out[f] = 0.0;
        continue;
      }
      std::int64_t rem = f;
      std::array<int, 3> id{0, 0, 0};
      for (int a = dim - 1; a >= 0; --a) {
        id[a] = static_cast<int>(rem % res[a]);
        rem /= res[a];
      }
      double diag = lambda * lambda;
      double off = 0.0;
      double bacc = 0.0;
      for (int a = 0; a < dim; ++a) {
        diag += 2.0 * h2inv[a];
        for (int s = -1; s <= 1; s += 2) {
          std::int64_t nb = f + s * stride[a];
          int ni = id[a] + s;
          if (ni < 0 || ni >= res[a]) continue;  // outside: value 0
          if (fixed[nb])
            bacc += h2inv[a] * dirichlet[nb];
          else
            off -= h2inv[a] * x[nb];
        }
      }
      out[f] = diag * x[f] + off;
      if (rhs_mode) (*b)[f] = bacc;
    }
  };

  std::vector<double> x(total, 0.0), b(total, 0.0), r(total, 0.0), p(total, 0.0), ap(total, 0.0);
  apply(x, r, true, &b);  // r = A*0 = 0, fills b
  for (std::int64_t f = 0; f < total; ++f) r[f] = b[f];
  p = r;
  double rr = 0;
  for (std::int64_t f = 0; f < total; ++f) rr += r[f] * r[f];

  auto inf_norm = [&](const std::vector<double>& v) {
    double m = 0;
    for (double q : v) m = std::max(m, std::abs(q));
    return m;
  };

  int it = 0;
  double rinf = inf_norm(r);
  while (rinf >= tol && it < max_iters) {
    apply(p, ap, false, nullptr);
    double pap = 0;
    for (std::int64_t f = 0; f < total; ++f) pap += p[f] * ap[f];
    if (pap <= 0) throw NumericalError("CG breakdown, residual " + std::to_string(rinf));
    double alpha = rr / pap;
    for (std::int64_t f = 0; f < total; ++f) {
      x[f] += alpha * p[f];
      r[f] -= alpha * ap[f];
    }
    double rr_new = 0;
    for (std::int64_t f = 0; f < total; ++f) rr_new += r[f] * r[f];
    double beta = rr_new / rr;
    rr = rr_new;
    for (std::int64_t f = 0; f < total; ++f) p[f] = r[f] + beta * p[f];
    rinf = inf_norm(r);
    ++it;
  }
  if (rinf >= tol)
    throw NumericalError("FD solve did not converge, residual " + std::to_string(rinf));

  g.values.assign(static_cast<size_t>(total), 0.0);
  for (std::int64_t f = 0; f < total; ++f)
    g.values[static_cast<size_t>(f)] = fixed[f] ? dirichlet[f] : x[f];
  // Discrete maximum principle up to solver tolerance.
  for (auto& v : g.values) {
    if (v < 0 && v > -1e-9) v = 0;
    if (v > 1 && v < 1 + 1e-9) v = 1;
  }
  return g;
}

std::vector<double> fd_radial_screened_poisson(double eps, double r_max, int n, double lambda,
                                               double h0, int dim) {
  if (n < 3) throw std::invalid_argument("need at least 3 grid points");
  if (r_max <= eps) throw std::invalid_argument("r_max must exceed eps");
  if (dim != 2 && dim != 3) throw std::invalid_argument("radial solve supports dim 2 or 3");
  double dr = (r_max - eps) / (n - 1);
  // Interior unknowns i = 1..n-2; h(eps) = h0, h(r_max) = 0.
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0), h(n, 0.0);
  for (int i = 1; i + 1 < n; ++i) {
    double r = eps + i * dr;
    double drift = (dim - 1) / (2.0 * r * dr);
    a[i] = 1.0 / (dr * dr) - drift;
    b[i] = -2.0 / (dr * dr) - lambda * lambda;
    c[i] = 1.0 / (dr * dr) + drift;
    d[i] = 0.0;
  }
  d[1] -= a[1] * h0;
  // h(r_max) = 0 contributes nothing.
  // Thomas algorithm on rows 1..n-2.
  for (int i = 2; i + 1 < n; ++i) {
    double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  h[n - 1] = 0.0;
  h[0] = h0;
  for (int i = n - 2; i >= 1; --i) h[i] = (d[i] - c[i] * h[i + 1]) / b[i];
  return h;
}

std::vector<std::vector<double>> stability_sim(const StabilityConfig& cfg) {
  if (cfg.dt <= 0) throw std::invalid_argument("dt must be positive");
  std::vector<std::vector<double>> out;
  for (double w : cfg.modes) {
    double rate = (cfg.flow == FlowKind::Heat) ? (w * w + cfg.lambda * cfg.lambda)
                                               : cfg.kappa_e * w * w;
    double factor = std::exp(-rate * cfg.dt);
    std::vector<double> traj(static_cast<size_t>(cfg.steps) + 1);
    traj[0] = 1.0;
    for (int s = 1; s <= cfg.steps; ++s) traj[static_cast<size_t>(s)] = traj[static_cast<size_t>(s - 1)] * factor;
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<double> stability_sim_grid(double mode, double lambda, double dt, int steps,
                                       int grid_n) {
  if (grid_n < 4) throw std::invalid_argument("grid too small");
  double dx = 2.0 * std::numbers::pi_v<double> / grid_n;
  std::vector<double> u(static_cast<size_t>(grid_n)), next(static_cast<size_t>(grid_n));
  for (int i = 0; i < grid_n; ++i) u[static_cast<size_t>(i)] = std::sin(mode * i * dx);
  std::vector<double> amps;
  auto amp = [&] {
    double m = 0;
    for (double v : u) m = std::max(m, std::abs(v));
    return m;
  };
  amps.push_back(amp());
  for (int s = 0; s < steps; ++s) {
    for (int i = 0; i < grid_n; ++i) {
      int im = (i + grid_n - 1) % grid_n, ip = (i + 1) % grid_n;
      double lap = (u[static_cast<size_t>(ip)] - 2.0 * u[static_cast<size_t>(i)] + u[static_cast<size_t>(im)]) / (dx * dx);
      next[static_cast<size_t>(i)] = u[static_cast<size_t>(i)] + dt * (lap - lambda * lambda * u[static_cast<size_t>(i)]);
    }
    u.swap(next);
    amps.push_back(amp());
  }
  return amps;
}

}  // namespace hotspot::oracles
