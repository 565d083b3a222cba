#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hotspot/common.hpp"
#include "hotspot/field.hpp"

namespace hotspot::losses {

// Piecewise-linear curve over normalized iteration t in [0,1], constant
// extrapolation at the ends.
struct Schedule {
  std::vector<std::pair<double, double>> knots;  // (t, value), sorted by t

  static Schedule constant(double v) { return Schedule{{{0.0, v}}}; }
  bool is_constant() const { return knots.size() <= 1; }
};

double schedule_eval(const Schedule& curve, double t);

struct PhaseConfig {
  double epsilon = 0.01;
  double clamp = 0.99;
};

struct LossConfig {
  Schedule w_boundary = Schedule::constant(1.0);
  Schedule w_eikonal = Schedule::constant(1.0);
  Schedule w_heat = Schedule::constant(1.0);
  Schedule w_area = Schedule::constant(0.0);
  Schedule w_sal = Schedule::constant(0.0);
  Schedule lambda = Schedule::constant(30.0);
  int p = 1;  // exponent for boundary/eikonal terms
  std::optional<PhaseConfig> phase;

  void validate() const;
};

// key = value serialization; schedules use dotted keys, e.g.
// `lambda.knots = 0:10,0.8:50`.
std::string serialize_loss_config(const LossConfig& cfg);
LossConfig parse_loss_config(const std::string& text);
LossConfig load_loss_config(const std::string& path);
void save_loss_config(const LossConfig& cfg, const std::string& path);

enum class SampleTag : std::uint8_t { Uniform = 0, Gaussian = 1 };

struct VolumeBatch {
  Eigen::MatrixXd points;  // d x n
  Eigen::VectorXd pdf;     // mixture density at each point, > 0
  std::vector<SampleTag> tags;
};

// Uniform samples in the box mixed with Gaussian samples centered on
// randomly chosen boundary-batch points; the mixture pdf is evaluated
// exactly over all batch centers.
VolumeBatch sample_volume(const Vec& box_lower, const Vec& box_upper,
                          const Eigen::MatrixXd& boundary_batch, std::int64_t n_uniform,
                          std::int64_t n_gauss, double sigma, std::uint64_t seed);

double boundary_loss(const Eigen::RowVectorXd& u_values, int p);
double eikonal_loss(const field::EvalResult& eval, const VolumeBatch& batch, int p);

// Exponent is clamped below at -700 before exponentiation; the factor then
// underflows to exactly 0 instead of producing NaNs downstream.
double heat_loss(const field::EvalResult& eval, const VolumeBatch& batch, double lambda);
double area_loss(const field::EvalResult& eval, const VolumeBatch& batch, double lambda);
double sal_loss(const Eigen::RowVectorXd& u_values, const Eigen::VectorXd& cloud_distances);

// Unsigned distance from each query to the nearest cloud point.
Eigen::VectorXd cloud_distance(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& cloud);

double phase_potential(double o);
double phase_log_transform(double o, double epsilon, double clamp);

struct LossBreakdown {
  double boundary = 0, eikonal = 0, heat = 0, area = 0, sal = 0, total = 0;
  double lambda = 0;
  double w_boundary = 0, w_eikonal = 0, w_heat = 0, w_area = 0, w_sal = 0;
  int p = 1;
};

struct TermInputs {
  Eigen::RowVectorXd boundary_values;            // u at boundary batch
  const field::EvalResult* volume_eval = nullptr;
  const VolumeBatch* volume = nullptr;
  const Eigen::VectorXd* sal_distances = nullptr;  // per boundary-ish sample
  const Eigen::RowVectorXd* sal_values = nullptr;
};

LossBreakdown total_loss(const TermInputs& in, const LossConfig& cfg, std::int64_t iter,
                         std::int64_t total_iters);

// Adjoints of the combined loss with respect to u and grad u at the volume
// batch, and with respect to u at the boundary batch. Shares the weight
// evaluation with total_loss.
struct Adjoints {
  Eigen::RowVectorXd boundary_value_adjoints;
  Eigen::RowVectorXd volume_value_adjoints;
  Eigen::MatrixXd volume_grad_adjoints;
};

Adjoints loss_adjoints(const TermInputs& in, const LossBreakdown& weights);

}  // namespace hotspot::losses
