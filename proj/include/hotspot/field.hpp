#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hotspot/common.hpp"

namespace hotspot::field {

enum class Activation : std::uint32_t { Softplus = 0, Sine = 1 };

struct Architecture {
  int input_dim = 2;
  int width = 128;
  int hidden_layers = 5;
  Activation activation = Activation::Softplus;
  double act_param = 100.0;  // softplus beta or sine omega0

  std::int64_t parameter_count() const;
  void validate() const;
};

// MLP with a single flat parameter vector; layer views are computed.
struct NeuralField {
  Architecture arch;
  Eigen::VectorXd params;
};

struct EvalResult {
  Eigen::RowVectorXd values;  // 1 x n
  Eigen::MatrixXd grads;      // d x n, input gradients
};

NeuralField make_field(const Architecture& arch);

// Value at a single point; bitwise equal to the batch path.
double forward(const NeuralField& f, const Vec& x);

// Batched value evaluation, one column per point.
Eigen::RowVectorXd forward_batch(const NeuralField& f, const Eigen::MatrixXd& x);

// Value and exact analytic input gradient, propagated jointly through the
// layers.
EvalResult forward_with_grad(const NeuralField& f, const Eigen::MatrixXd& x);

// Gradient with respect to theta of
//   L = sum_i [ value_adjoint_i * u(x_i) + grad_adjoint_i . grad_x u(x_i) ],
// accumulated into `out`. grad_adjoints may be empty (0 x 0) when the loss
// only touches values.
void accumulate_param_gradient(const NeuralField& f, const Eigen::MatrixXd& x,
                               const Eigen::RowVectorXd& value_adjoints,
                               const Eigen::MatrixXd& grad_adjoints, Eigen::VectorXd& out);

Eigen::VectorXd param_gradient(const NeuralField& f, const Eigen::MatrixXd& x,
                               const Eigen::RowVectorXd& value_adjoints,
                               const Eigen::MatrixXd& grad_adjoints);

// Random initialization (He-style fan-in scaling), deterministic in seed.
NeuralField init_random(const Architecture& arch, std::uint64_t seed);

// Pre-fit to u0(x) = ||x|| - radius on uniform samples in [-1,1]^d.
NeuralField init_geometric(const Architecture& arch, double radius, std::uint64_t seed,
                           int fit_steps = 1000, int fit_samples = 2000, double fit_lr = 2e-3);

struct AdamState {
  std::int64_t step = 0;
  Eigen::VectorXd m, v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(std::int64_t n_params, double lr = 1e-4, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8);

// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grads);

// Checkpoint: header (magic, version, architecture) + little-endian f64
// parameters, optionally followed by optimizer state and iteration count.
struct Checkpoint {
  NeuralField field;
  std::optional<AdamState> adam;
  std::int64_t iteration = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hotspot::field
