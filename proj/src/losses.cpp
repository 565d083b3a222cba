#include "hotspot/losses.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hotspot/rng.hpp"

namespace hotspot::losses {

double schedule_eval(const Schedule& curve, double t) {
  if (curve.knots.empty()) throw std::invalid_argument("empty schedule");
  for (size_t i = 1; i < curve.knots.size(); ++i)
    if (curve.knots[i].first < curve.knots[i - 1].first)
      throw std::invalid_argument("schedule knots must be sorted");
  if (t <= curve.knots.front().first) return curve.knots.front().second;
  if (t >= curve.knots.back().first) return curve.knots.back().second;
  for (size_t i = 1; i < curve.knots.size(); ++i) {
    if (t <= curve.knots[i].first) {
      auto [t0, v0] = curve.knots[i - 1];
      auto [t1, v1] = curve.knots[i];
      if (t1 == t0) return v1;
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return curve.knots.back().second;
}

namespace {

void check_nonneg(const Schedule& s, const char* name) {
  for (auto [t, v] : s.knots)
    if (v < 0) throw std::invalid_argument(std::string(name) + " must be nonnegative");
}

}  // namespace

void LossConfig::validate() const {
  if (p != 1 && p != 2) throw std::invalid_argument("p must be 1 or 2");
  check_nonneg(w_boundary, "w_boundary");
  check_nonneg(w_eikonal, "w_eikonal");
  check_nonneg(w_heat, "w_heat");
  check_nonneg(w_area, "w_area");
  check_nonneg(w_sal, "w_sal");
  for (auto [t, v] : lambda.knots)
    if (v <= 0) throw std::invalid_argument("lambda must be positive");
  for (const Schedule* s : {&w_boundary, &w_eikonal, &w_heat, &w_area, &w_sal, &lambda}) {
    if (s->knots.empty()) throw std::invalid_argument("empty schedule");
    for (size_t i = 1; i < s->knots.size(); ++i)
      if (s->knots[i].first < s->knots[i - 1].first)
        throw std::invalid_argument("schedule knots must be sorted");
  }
  if (phase && (phase->epsilon <= 0 || phase->clamp <= 0 || phase->clamp >= 1))
    throw std::invalid_argument("phase config needs epsilon > 0 and clamp in (0,1)");
}

VolumeBatch sample_volume(const Vec& box_lower, const Vec& box_upper,
                          const Eigen::MatrixXd& boundary_batch, std::int64_t n_uniform,
                          std::int64_t n_gauss, double sigma, std::uint64_t seed) {
  const int d = static_cast<int>(box_lower.size());
  if (n_gauss > 0 && boundary_batch.cols() == 0)
    throw std::invalid_argument("gaussian samples need a nonempty boundary batch");
  if (n_gauss > 0 && sigma <= 0) throw std::invalid_argument("sigma must be positive");
  double volume = 1.0;
  for (int a = 0; a < d; ++a) {
    if (box_upper[a] <= box_lower[a]) throw std::invalid_argument("box must have positive extent");
    volume *= box_upper[a] - box_lower[a];
  }

  const std::int64_t n = n_uniform + n_gauss;
  VolumeBatch batch;
  batch.points.resize(d, n);
  batch.pdf.resize(n);
  batch.tags.resize(static_cast<size_t>(n));

  auto rng = substream(seed, "volume-sampler");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::int64_t i = 0; i < n_uniform; ++i) {
    for (int a = 0; a < d; ++a)
      batch.points(a, i) = box_lower[a] + uni(rng) * (box_upper[a] - box_lower[a]);
    batch.tags[static_cast<size_t>(i)] = SampleTag::Uniform;
  }
  const std::int64_t n_centers = boundary_batch.cols();
  for (std::int64_t i = 0; i < n_gauss; ++i) {
    std::int64_t c = std::min<std::int64_t>(
        static_cast<std::int64_t>(uni(rng) * static_cast<double>(n_centers)), n_centers - 1);
    for (int a = 0; a < d; ++a) batch.points(a, n_uniform + i) = boundary_batch(a, c) + sigma * gauss(rng);
    batch.tags[static_cast<size_t>(n_uniform + i)] = SampleTag::Gaussian;
  }

  const double w_u = static_cast<double>(n_uniform) / static_cast<double>(n);
  const double w_g = static_cast<double>(n_gauss) / static_cast<double>(n);
  batch.pdf.setConstant(w_u / volume);
  if (n_gauss > 0) {
    // Exact mixture density over all B centers: O(n * B).
    const double coef = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * d);
    Eigen::VectorXd c2 = boundary_batch.colwise().squaredNorm();
    Eigen::VectorXd x2 = batch.points.colwise().squaredNorm();
    Eigen::MatrixXd cross = boundary_batch.transpose() * batch.points;  // B x n
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (std::int64_t i = 0; i < n; ++i) {
      double acc = 0;
      for (std::int64_t j = 0; j < n_centers; ++j) {
        double d2 = std::max(0.0, c2[j] + x2[i] - 2.0 * cross(j, i));
        acc += std::exp(-d2 * inv2s2);
      }
      batch.pdf[i] += w_g * coef * acc / static_cast<double>(n_centers);
    }
  }
  return batch;
}

double boundary_loss(const Eigen::RowVectorXd& u_values, int p) {
  if (u_values.size() == 0) throw std::invalid_argument("empty boundary batch");
  if (p == 1) return u_values.array().abs().mean();
  return u_values.array().square().mean();
}

double eikonal_loss(const field::EvalResult& eval, const VolumeBatch& batch, int p) {
  const std::int64_t n = batch.points.cols();
  if (eval.values.size() != n) throw std::invalid_argument("eval/batch length mismatch");
  Eigen::ArrayXd resid = (eval.grads.colwise().norm().transpose().array() - 1.0).abs();
  if (p == 2) resid = resid.square();
  return (resid / batch.pdf.array()).mean();
}

namespace {

inline double clamped_exp(double e) { return std::exp(std::max(e, -700.0)); }

}  // namespace

double heat_loss(const field::EvalResult& eval, const VolumeBatch& batch, double lambda) {
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
  const std::int64_t n = batch.points.cols();
  if (eval.values.size() != n) throw std::invalid_argument("eval/batch length mismatch");
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    double g2 = eval.grads.col(i).squaredNorm();
    double e = clamped_exp(-2.0 * lambda * std::abs(eval.values[i]));
    acc += 0.5 * e * (g2 + 1.0) / batch.pdf[i];
  }
  return acc / static_cast<double>(n);
}

double area_loss(const field::EvalResult& eval, const VolumeBatch& batch, double lambda) {
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
  const std::int64_t n = batch.points.cols();
  if (eval.values.size() != n) throw std::invalid_argument("eval/batch length mismatch");
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    double e = clamped_exp(-lambda * std::abs(eval.values[i]));
    acc += e * eval.grads.col(i).norm() / batch.pdf[i];
  }
  return acc / static_cast<double>(n);
}

double sal_loss(const Eigen::RowVectorXd& u_values, const Eigen::VectorXd& cloud_distances) {
  if (u_values.size() != cloud_distances.size())
    throw std::invalid_argument("sal: length mismatch");
  return (u_values.array().abs() - cloud_distances.transpose().array()).abs().mean();
}

Eigen::VectorXd cloud_distance(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& cloud) {
  if (cloud.cols() == 0) throw std::invalid_argument("empty cloud");
  Eigen::VectorXd out(queries.cols());
  Eigen::VectorXd c2 = cloud.colwise().squaredNorm();
  for (std::int64_t i = 0; i < queries.cols(); ++i) {
    Eigen::VectorXd d2 = c2 - 2.0 * (cloud.transpose() * queries.col(i));
    out[i] = std::sqrt(std::max(0.0, d2.minCoeff() + queries.col(i).squaredNorm()));
  }
  return out;
}

double phase_potential(double o) { return o * o - 2.0 * std::abs(o) + 1.0; }

double phase_log_transform(double o, double epsilon, double clamp) {
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  double oc = std::clamp(o, -clamp, clamp);
  double s = -std::sqrt(epsilon) * std::log(1.0 - std::abs(oc));
  return oc >= 0 ? s : -s;
}

LossBreakdown total_loss(const TermInputs& in, const LossConfig& cfg, std::int64_t iter,
                         std::int64_t total_iters) {
  cfg.validate();
  double t = total_iters > 0 ? static_cast<double>(iter) / static_cast<double>(total_iters) : 0.0;
  LossBreakdown b;
  b.p = cfg.p;
  b.lambda = schedule_eval(cfg.lambda, t);
  b.w_boundary = schedule_eval(cfg.w_boundary, t);
  b.w_eikonal = schedule_eval(cfg.w_eikonal, t);
  b.w_heat = schedule_eval(cfg.w_heat, t);
  b.w_area = schedule_eval(cfg.w_area, t);
  b.w_sal = schedule_eval(cfg.w_sal, t);

  if (in.boundary_values.size() > 0) b.boundary = boundary_loss(in.boundary_values, cfg.p);
  if (in.volume_eval && in.volume) {
    b.eikonal = eikonal_loss(*in.volume_eval, *in.volume, cfg.p);
    b.heat = heat_loss(*in.volume_eval, *in.volume, b.lambda);
    if (b.w_area > 0) b.area = area_loss(*in.volume_eval, *in.volume, b.lambda);
  }
  if (b.w_sal > 0 && in.sal_values && in.sal_distances)
    b.sal = sal_loss(*in.sal_values, *in.sal_distances);

  b.total = b.w_boundary * b.boundary + b.w_eikonal * b.eikonal + b.w_heat * b.heat +
            b.w_area * b.area + b.w_sal * b.sal;
  return b;
}

namespace {

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

Adjoints loss_adjoints(const TermInputs& in, const LossBreakdown& w) {
  Adjoints adj;
  if (in.boundary_values.size() > 0) {
    const std::int64_t nb = in.boundary_values.size();
    adj.boundary_value_adjoints.resize(nb);
    for (std::int64_t i = 0; i < nb; ++i) {
      double u = in.boundary_values[i];
      double d = (w.p == 1) ? sgn(u) : 2.0 * u;
      adj.boundary_value_adjoints[i] = (w.w_boundary / static_cast<double>(nb)) * d;
    }
  }
  if (in.volume_eval && in.volume) {
    const field::EvalResult& ev = *in.volume_eval;
    const VolumeBatch& vb = *in.volume;
    const std::int64_t n = vb.points.cols();
    const int d = static_cast<int>(vb.points.rows());
    adj.volume_value_adjoints = Eigen::RowVectorXd::Zero(n);
    adj.volume_grad_adjoints = Eigen::MatrixXd::Zero(d, n);
    for (std::int64_t i = 0; i < n; ++i) {
      double q = 1.0 / (static_cast<double>(n) * vb.pdf[i]);
      double u = ev.values[i];
      Eigen::VectorXd g = ev.grads.col(i);
      double gn = g.norm();
      // eikonal
      if (w.w_eikonal > 0 && gn > 0) {
        double coef = (w.p == 1) ? (gn >= 1.0 ? 1.0 : -1.0) : 2.0 * (gn - 1.0);
        adj.volume_grad_adjoints.col(i) += (w.w_eikonal * q * coef / gn) * g;
      }
      // heat
      if (w.w_heat > 0) {
        double e = clamped_exp(-2.0 * w.lambda * std::abs(u));
        adj.volume_value_adjoints[i] +=
            -w.w_heat * q * w.lambda * sgn(u) * e * (gn * gn + 1.0);
        adj.volume_grad_adjoints.col(i) += (w.w_heat * q * e) * g;
      }
      // area
      if (w.w_area > 0) {
        double e = clamped_exp(-w.lambda * std::abs(u));
        adj.volume_value_adjoints[i] += -w.w_area * q * w.lambda * sgn(u) * e * gn;
        if (gn > 0) adj.volume_grad_adjoints.col(i) += (w.w_area * q * e / gn) * g;
      }
      // sal, applied at the volume batch
      if (w.w_sal > 0 && in.sal_values && in.sal_distances && in.sal_values->size() == n) {
        double uu = (*in.sal_values)[i];
        double r = std::abs(uu) - (*in.sal_distances)[i];
        adj.volume_value_adjoints[i] += (w.w_sal / static_cast<double>(n)) * sgn(r) * sgn(uu);
      }
    }
  }
  return adj;
}

namespace {

std::string schedule_to_string(const Schedule& s) {
  std::ostringstream out;
  out.precision(17);
  for (size_t i = 0; i < s.knots.size(); ++i) {
    if (i) out << ',';
    out << s.knots[i].first << ':' << s.knots[i].second;
  }
  return out.str();
}

Schedule schedule_from_string(const std::string& text) {
  Schedule s;
  std::istringstream ss(text);
  std::string knot;
  while (std::getline(ss, knot, ',')) {
    auto colon = knot.find(':');
    if (colon == std::string::npos) throw ParseError("bad schedule knot '" + knot + "'");
    s.knots.emplace_back(std::stod(knot.substr(0, colon)), std::stod(knot.substr(colon + 1)));
  }
  if (s.knots.empty()) throw ParseError("empty schedule");
  return s;
}

void emit_schedule(std::ostringstream& out, const std::string& key, const Schedule& s) {
  if (s.is_constant()) {
    out << key << " = " << s.knots.front().second << '\n';
  } else {
    out << key << ".knots = " << schedule_to_string(s) << '\n';
  }
}

}  // namespace

std::string serialize_loss_config(const LossConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "p = " << cfg.p << '\n';
  emit_schedule(out, "lambda", cfg.lambda);
  emit_schedule(out, "w_boundary", cfg.w_boundary);
  emit_schedule(out, "w_eikonal", cfg.w_eikonal);
  emit_schedule(out, "w_heat", cfg.w_heat);
  emit_schedule(out, "w_area", cfg.w_area);
  emit_schedule(out, "w_sal", cfg.w_sal);
  if (cfg.phase) {
    out << "phase.epsilon = " << cfg.phase->epsilon << '\n';
    out << "phase.clamp = " << cfg.phase->clamp << '\n';
  }
  return out.str();
}

LossConfig parse_loss_config(const std::string& text) {
  LossConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  PhaseConfig phase;
  bool has_phase = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream check(line);
      std::string tok;
      if (check >> tok) throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "p") cfg.p = std::stoi(value);
      else if (key == "lambda") cfg.lambda = Schedule::constant(std::stod(value));
      else if (key == "lambda.knots") cfg.lambda = schedule_from_string(value);
      else if (key == "w_boundary") cfg.w_boundary = Schedule::constant(std::stod(value));
      else if (key == "w_boundary.knots") cfg.w_boundary = schedule_from_string(value);
      else if (key == "w_eikonal") cfg.w_eikonal = Schedule::constant(std::stod(value));
      else if (key == "w_eikonal.knots") cfg.w_eikonal = schedule_from_string(value);
      else if (key == "w_heat") cfg.w_heat = Schedule::constant(std::stod(value));
      else if (key == "w_heat.knots") cfg.w_heat = schedule_from_string(value);
      else if (key == "w_area") cfg.w_area = Schedule::constant(std::stod(value));
      else if (key == "w_area.knots") cfg.w_area = schedule_from_string(value);
      else if (key == "w_sal") cfg.w_sal = Schedule::constant(std::stod(value));
      else if (key == "w_sal.knots") cfg.w_sal = schedule_from_string(value);
      else if (key == "phase.epsilon") { phase.epsilon = std::stod(value); has_phase = true; }
      else if (key == "phase.clamp") { phase.clamp = std::stod(value); has_phase = true; }
      else throw ParseError("unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad value for key '" + key + "'");
    }
  }
  if (has_phase) cfg.phase = phase;
  cfg.validate();
  return cfg;
}

LossConfig load_loss_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_loss_config(buf.str());
}

void save_loss_config(const LossConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize_loss_config(cfg);
}

}  // namespace hotspot::losses
