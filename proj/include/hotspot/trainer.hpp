#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hotspot/common.hpp"
#include "hotspot/field.hpp"
#include "hotspot/losses.hpp"

namespace hotspot::trainer {

struct TrainConfig {
  field::Architecture arch;
  std::int64_t iterations = 20000;
  double boundary_fraction = 0.1;
  std::int64_t n_uniform = 4096;
  std::int64_t n_gauss = 4096;
  double sigma = 0.5;
  Vec box_lower, box_upper;  // empty -> [-1.5, 1.5]^d
  losses::LossConfig loss;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::int64_t eval_interval = 100;      // history logging stride
  std::string checkpoint_dir;            // empty: no interval checkpoints
  bool geometric_init = true;
  double init_radius = 0.5;
  std::ostream* machine_out = nullptr;   // `iter=... total=...` lines
  std::ostream* progress_out = nullptr;  // human progress lines

  void validate() const;
};

struct HistoryEntry {
  std::int64_t iteration = 0;
  losses::LossBreakdown loss;
  double wall_clock = 0;  // seconds since training start
  double grad_norm = 0;
};

struct TrainHistory {
  std::vector<HistoryEntry> entries;
};

void save_history_csv(const TrainHistory& h, const std::string& path);

struct TrainResult {
  field::NeuralField field;
  field::AdamState adam;
  TrainHistory history;
  std::int64_t iteration = 0;
};

// Deterministic in (seed, config, cloud). Per-iteration randomness comes
// from indexed substreams, so resuming from a checkpoint at iteration k
// reproduces the uninterrupted run bitwise. On a non-finite loss the last
// good state is restored once with a halved learning rate; a second
// failure raises TrainingDivergence.
TrainResult train(const PointCloud& cloud, const TrainConfig& config,
                  const std::optional<field::Checkpoint>& resume = std::nullopt);

enum class Demo1dMode { EikonalOnly, WithHeat };

struct Demo1dConfig {
  std::int64_t iterations = 2500;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  int width = 32;
  int hidden_layers = 3;
  double lambda = 5.0;
  double w_boundary = 100.0;
  double w_eikonal = 1.0;
  double w_heat = 8.0;
  bool adversarial_init = true;
  std::int64_t init_steps = 800;
};

struct Demo1dResult {
  field::NeuralField field;
  std::vector<std::pair<std::int64_t, double>> error_curve;  // (iter, max probe error)
  double final_max_error = 0;
  std::vector<double> probe_x, probe_u, probe_ref;
};

// Fits a 1D field to boundary points {-0.5, 0.5} with reference
// u*(x) = |x| - 0.5, starting from a multi-kink profile that already
// satisfies the boundary and eikonal constraints but is not the signed
// distance. Error is max |u - u*| over a 1001-point grid on [-1, 1],
// excluding 0.05-neighborhoods of the profile kinks.
Demo1dResult demo_1d(Demo1dMode mode, const Demo1dConfig& cfg = {});

// Multi-kink pseudo-distance used for the adversarial start.
double pseudo_profile_1d(double x);

// Least-squares prefit of a 1D field to an arbitrary profile; used by the
// demo's adversarial start and by stationarity probes.
void fit_profile_1d(field::NeuralField& f, const std::function<double(double)>& profile,
                    std::int64_t steps, std::int64_t samples, double lr, std::uint64_t seed);

}  // namespace hotspot::trainer
