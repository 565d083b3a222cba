#include "hotspot/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "hotspot/rng.hpp"

namespace hotspot::field {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Flat layout: W1 (row-major) b1 | W2 b2 | ... | w_out b_out.
struct Layout {
  int d, w, h;
  std::int64_t layer_offset(int l) const {  // l in [0, h), input layer is 0
    if (l == 0) return 0;
    return static_cast<std::int64_t>(w) * d + w + static_cast<std::int64_t>(l - 1) * (w * w + w);
  }
  std::int64_t out_offset() const {
    if (h == 0) return 0;
    return layer_offset(1) + static_cast<std::int64_t>(h - 1) * (w * w + w);
  }
  int out_fan() const { return h == 0 ? d : w; }
  std::int64_t total() const { return out_offset() + out_fan() + 1; }
  int fan_in(int l) const { return l == 0 ? d : w; }
};

Layout layout_of(const Architecture& a) { return Layout{a.input_dim, a.width, a.hidden_layers}; }

inline void softplus_value(double beta, const Eigen::MatrixXd& z, Eigen::MatrixXd& a) {
  a = (z.array() * beta).unaryExpr([beta](double m) {
    return (std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)))) / beta;
  });
}

inline void sigmoid(double beta, const Eigen::MatrixXd& z, Eigen::MatrixXd& s) {
  s = (z.array() * beta).unaryExpr([](double m) {
    if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
    double e = std::exp(m);
    return e / (1.0 + e);
  });
}

struct ActEval {
  Eigen::MatrixXd value;   // act(z)
  Eigen::MatrixXd deriv;   // act'(z)
};

ActEval activate(const Architecture& arch, const Eigen::MatrixXd& z, bool need_deriv) {
  ActEval r;
  if (arch.activation == Activation::Softplus) {
    softplus_value(arch.act_param, z, r.value);
    if (need_deriv) sigmoid(arch.act_param, z, r.deriv);
  } else {
    double w0 = arch.act_param;
    r.value = z.unaryExpr([w0](double v) { return std::sin(w0 * v); });
    if (need_deriv) r.deriv = z.unaryExpr([w0](double v) { return w0 * std::cos(w0 * v); });
  }
  return r;
}

Eigen::MatrixXd activate_second(const Architecture& arch, const Eigen::MatrixXd& z,
                                const ActEval& act) {
  if (arch.activation == Activation::Softplus) {
    return arch.act_param * (act.deriv.array() * (1.0 - act.deriv.array())).matrix();
  }
  double w0 = arch.act_param;
  return z.unaryExpr([w0](double v) { return -w0 * w0 * std::sin(w0 * v); });
}

// Per-column products keep evaluation bitwise independent of batch width: the
// same matrix-vector kernel runs for every column no matter how points are
// grouped into batches.
template <typename LHS>
inline void product_per_column(const LHS& W, const Eigen::MatrixXd& a, Eigen::MatrixXd& z) {
  for (std::int64_t c = 0; c < a.cols(); ++c) z.col(c).noalias() = W * a.col(c);
}

template <typename RowVec>
inline void row_product_per_column(const RowVec& w, const Eigen::MatrixXd& a,
                                   Eigen::RowVectorXd& u) {
  for (std::int64_t c = 0; c < a.cols(); ++c) u(c) = w.dot(a.col(c));
}

}  // namespace

std::int64_t Architecture::parameter_count() const { return layout_of(*this).total(); }

void Architecture::validate() const {
  if (input_dim < 1 || input_dim > 3) throw std::invalid_argument("input dim must be 1..3");
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  if (hidden_layers < 0) throw std::invalid_argument("hidden layer count must be >= 0");
  if (act_param <= 0) throw std::invalid_argument("activation parameter must be positive");
}

NeuralField make_field(const Architecture& arch) {
  arch.validate();
  NeuralField f;
  f.arch = arch;
  f.params = Eigen::VectorXd::Zero(arch.parameter_count());
  return f;
}

namespace {

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> z;       // pre-activations per layer
  std::vector<ActEval> act;             // activations and derivatives
};

// Value forward pass; keeps per-layer state when `trace` is non-null.
Eigen::RowVectorXd forward_impl(const NeuralField& f, const Eigen::MatrixXd& x,
                                ForwardTrace* trace, bool need_deriv) {
  const Layout lay = layout_of(f.arch);
  const double* p = f.params.data();
  Eigen::MatrixXd a = x;
  for (int l = 0; l < lay.h; ++l) {
    int fi = lay.fan_in(l);
    RowMajorMap W(p + lay.layer_offset(l), lay.w, fi);
    Eigen::Map<const Eigen::VectorXd> b(p + lay.layer_offset(l) + static_cast<std::int64_t>(lay.w) * fi, lay.w);
    Eigen::MatrixXd z(lay.w, x.cols());
    product_per_column(W, a, z);
    z.colwise() += b;
    ActEval ae = activate(f.arch, z, need_deriv);
    a = ae.value;
    if (trace) {
      trace->z.push_back(std::move(z));
      trace->act.push_back(std::move(ae));
    }
  }
  Eigen::Map<const Eigen::RowVectorXd> wout(p + lay.out_offset(), lay.out_fan());
  double bout = p[lay.out_offset() + lay.out_fan()];
  Eigen::RowVectorXd u(x.cols());
  row_product_per_column(wout, a, u);
  u.array() += bout;
  return u;
}

}  // namespace

Eigen::RowVectorXd forward_batch(const NeuralField& f, const Eigen::MatrixXd& x) {
  if (x.rows() != f.arch.input_dim) throw std::invalid_argument("input dimension mismatch");
  return forward_impl(f, x, nullptr, false);
}

double forward(const NeuralField& f, const Vec& x) {
  Eigen::MatrixXd xm = x;
  return forward_batch(f, xm)(0);
}

EvalResult forward_with_grad(const NeuralField& f, const Eigen::MatrixXd& x) {
  if (x.rows() != f.arch.input_dim) throw std::invalid_argument("input dimension mismatch");
  const Layout lay = layout_of(f.arch);
  const double* p = f.params.data();
  const int d = lay.d;
  const std::int64_t n = x.cols();

  if (lay.h == 0) {
    Eigen::Map<const Eigen::RowVectorXd> wlin(p + lay.out_offset(), d);
    EvalResult r;
    r.values.resize(n);
    row_product_per_column(wlin, x, r.values);
    r.values.array() += p[lay.out_offset() + d];
    r.grads = wlin.transpose().replicate(1, n);
    return r;
  }

  ForwardTrace trace;
  forward_impl(f, x, &trace, true);

  // One Jacobian stream per input coordinate: J_l = act'(z_l) o (W_l J_{l-1}).
  std::vector<Eigen::MatrixXd> J(d);
  for (int k = 0; k < d; ++k) J[k].resize(lay.w, n);
  for (int l = 0; l < lay.h; ++l) {
    int fi = lay.fan_in(l);
    RowMajorMap W(p + lay.layer_offset(l), lay.w, fi);
    const Eigen::MatrixXd& dv = trace.act[l].deriv;
    for (int k = 0; k < d; ++k) {
      if (l == 0) {
        J[k] = dv.array().colwise() * W.col(k).array();
      } else {
        Eigen::MatrixXd s(lay.w, n);
        product_per_column(W, J[k], s);
        J[k] = dv.array() * s.array();
      }
    }
  }
  Eigen::Map<const Eigen::RowVectorXd> wout(p + lay.out_offset(), lay.w);
  double bout = p[lay.out_offset() + lay.w];

  EvalResult r;
  r.values.resize(n);
  row_product_per_column(wout, trace.act[lay.h - 1].value, r.values);
  r.values.array() += bout;
  r.grads.resize(d, n);
  Eigen::RowVectorXd gk(n);
  for (int k = 0; k < d; ++k) {
    row_product_per_column(wout, J[k], gk);
    r.grads.row(k) = gk;
  }
  return r;
}

void accumulate_param_gradient(const NeuralField& f, const Eigen::MatrixXd& x,
                               const Eigen::RowVectorXd& value_adjoints,
                               const Eigen::MatrixXd& grad_adjoints, Eigen::VectorXd& out) {
  if (x.rows() != f.arch.input_dim) throw std::invalid_argument("input dimension mismatch");
  if (value_adjoints.size() != x.cols()) throw std::invalid_argument("value adjoint length mismatch");
  const bool with_grad = grad_adjoints.size() > 0;
  if (with_grad && (grad_adjoints.rows() != x.rows() || grad_adjoints.cols() != x.cols()))
    throw std::invalid_argument("gradient adjoint shape mismatch");
  if (out.size() != f.params.size()) throw std::invalid_argument("output gradient length mismatch");

  const Layout lay = layout_of(f.arch);
  const double* p = f.params.data();
  const std::int64_t n = x.cols();
  if (n == 0) return;

  if (lay.h == 0) {
    double* g0 = out.data();
    Eigen::Map<Eigen::VectorXd> gw(g0 + lay.out_offset(), lay.d);
    gw += x * value_adjoints.transpose();
    if (with_grad) gw += grad_adjoints.rowwise().sum();
    g0[lay.out_offset() + lay.d] += value_adjoints.sum();
    return;
  }

  ForwardTrace trace;
  forward_impl(f, x, &trace, true);

  // Tangent stream T_l = act'(z_l) o S_l with S_l = W_l T_{l-1}, T_0 holding
  // the per-point gradient adjoints. The gradient part of the loss is then
  // w_out . T_H per point, and reverse mode runs over (value, tangent).
  std::vector<Eigen::MatrixXd> T(lay.h + 1), S(lay.h);
  if (with_grad) {
    T[0] = grad_adjoints;
    for (int l = 0; l < lay.h; ++l) {
      int fi = lay.fan_in(l);
      RowMajorMap W(p + lay.layer_offset(l), lay.w, fi);
      S[l].resize(lay.w, n);
      S[l].noalias() = W * T[l];
      T[l + 1] = trace.act[l].deriv.array() * S[l].array();
    }
  }

  Eigen::Map<const Eigen::RowVectorXd> wout(p + lay.out_offset(), lay.w);
  double* g = out.data();
  RowMajorMutMap gwout_wrap(g + lay.out_offset(), 1, lay.w);

  // Output layer adjoints.
  const Eigen::MatrixXd& aH = trace.act[lay.h - 1].value;
  Eigen::VectorXd gwout = aH * value_adjoints.transpose();
  if (with_grad) gwout += T[lay.h].rowwise().sum();
  gwout_wrap += gwout.transpose();
  g[lay.out_offset() + lay.w] += value_adjoints.sum();

  Eigen::MatrixXd abar = wout.transpose() * value_adjoints;  // w x n
  Eigen::MatrixXd tbar;
  if (with_grad) tbar = wout.transpose().replicate(1, n);

  for (int l = lay.h - 1; l >= 0; --l) {
    int fi = lay.fan_in(l);
    RowMajorMap W(p + lay.layer_offset(l), lay.w, fi);
    const Eigen::MatrixXd& dv = trace.act[l].deriv;

    Eigen::MatrixXd zbar = abar.array() * dv.array();
    Eigen::MatrixXd sbar;
    if (with_grad) {
      Eigen::MatrixXd d2 = activate_second(f.arch, trace.z[l], trace.act[l]);
      zbar.array() += tbar.array() * d2.array() * S[l].array();
      sbar = tbar.array() * dv.array();
    }

    const Eigen::MatrixXd& prev_a = (l == 0) ? x : trace.act[l - 1].value;
    RowMajorMutMap gW(g + lay.layer_offset(l), lay.w, fi);
    Eigen::MatrixXd gWacc(lay.w, fi);
    gWacc.noalias() = zbar * prev_a.transpose();
    if (with_grad) gWacc.noalias() += sbar * T[l].transpose();
    gW += gWacc;
    Eigen::Map<Eigen::VectorXd> gb(g + lay.layer_offset(l) + static_cast<std::int64_t>(lay.w) * fi, lay.w);
    gb += zbar.rowwise().sum();

    if (l > 0) {
      Eigen::MatrixXd next_abar(fi, n);
      next_abar.noalias() = W.transpose() * zbar;
      abar = std::move(next_abar);
      if (with_grad) {
        Eigen::MatrixXd next_tbar(fi, n);
        next_tbar.noalias() = W.transpose() * sbar;
        tbar = std::move(next_tbar);
      }
    }
  }
}

Eigen::VectorXd param_gradient(const NeuralField& f, const Eigen::MatrixXd& x,
                               const Eigen::RowVectorXd& value_adjoints,
                               const Eigen::MatrixXd& grad_adjoints) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(f.params.size());
  accumulate_param_gradient(f, x, value_adjoints, grad_adjoints, g);
  return g;
}

NeuralField init_random(const Architecture& arch, std::uint64_t seed) {
  NeuralField f = make_field(arch);
  const Layout lay = layout_of(arch);
  auto rng = substream(seed, "field-init");
  double* p = f.params.data();
  for (int l = 0; l < lay.h; ++l) {
    int fi = lay.fan_in(l);
    double* W = p + lay.layer_offset(l);
    std::int64_t nw = static_cast<std::int64_t>(lay.w) * fi;
    if (arch.activation == Activation::Sine) {
      double bound = (l == 0) ? 1.0 / fi : std::sqrt(6.0 / fi) / arch.act_param;
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::int64_t i = 0; i < nw; ++i) W[i] = u(rng);
    } else {
      std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / fi));
      for (std::int64_t i = 0; i < nw; ++i) W[i] = gauss(rng);
    }
    // biases stay zero
  }
  std::normal_distribution<double> gauss(0.0, std::sqrt(1.0 / lay.out_fan()));
  for (int i = 0; i < lay.out_fan(); ++i) p[lay.out_offset() + i] = gauss(rng);
  return f;
}

NeuralField init_geometric(const Architecture& arch, double radius, std::uint64_t seed,
                           int fit_steps, int fit_samples, double fit_lr) {
  if (radius <= 0) throw std::invalid_argument("radius must be positive");
  NeuralField f = init_random(arch, seed);
  auto rng = substream(seed, "geometric-init");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd x(arch.input_dim, fit_samples);
  for (int i = 0; i < fit_samples; ++i)
    for (int a = 0; a < arch.input_dim; ++a) x(a, i) = u(rng);
  Eigen::RowVectorXd target = x.colwise().norm();
  target.array() -= radius;
  AdamState adam = make_adam(f.params.size(), fit_lr);
  Eigen::MatrixXd no_grad_adj;
  for (int s = 0; s < fit_steps; ++s) {
    Eigen::RowVectorXd u_vals = forward_batch(f, x);
    Eigen::RowVectorXd adj = (2.0 / fit_samples) * (u_vals - target);
    Eigen::VectorXd g = param_gradient(f, x, adj, no_grad_adj);
    adam_step(adam, f.params, g);
  }
  return f;
}

AdamState make_adam(std::int64_t n_params, double lr, double beta1, double beta2, double eps) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n_params);
  s.v = Eigen::VectorXd::Zero(n_params);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grads) {
  if (theta.size() != grads.size() || theta.size() != state.m.size())
    throw std::invalid_argument("adam: length mismatch");
  if (!grads.allFinite()) throw TrainingDivergence("non-finite gradient in adam step");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  theta.array() -=
      state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

namespace {

constexpr char kMagic[8] = {'H', 'S', 'P', 'T', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated checkpoint");
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  std::uint64_t n = static_cast<std::uint64_t>(v.size());
  write_raw(out, n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

Eigen::VectorXd read_vector(std::ifstream& in) {
  std::uint64_t n;
  read_raw(in, n);
  Eigen::VectorXd v(static_cast<std::int64_t>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  const Architecture& a = ckpt.field.arch;
  write_raw(out, static_cast<std::int32_t>(a.input_dim));
  write_raw(out, static_cast<std::int32_t>(a.width));
  write_raw(out, static_cast<std::int32_t>(a.hidden_layers));
  write_raw(out, static_cast<std::uint32_t>(a.activation));
  write_raw(out, a.act_param);
  write_vector(out, ckpt.field.params);
  std::uint8_t has_adam = ckpt.adam.has_value() ? 1 : 0;
  write_raw(out, has_adam);
  if (ckpt.adam) {
    const AdamState& s = *ckpt.adam;
    write_raw(out, s.lr);
    write_raw(out, s.beta1);
    write_raw(out, s.beta2);
    write_raw(out, s.eps);
    write_raw(out, static_cast<std::int64_t>(s.step));
    write_vector(out, s.m);
    write_vector(out, s.v);
  }
  write_raw(out, static_cast<std::int64_t>(ckpt.iteration));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a checkpoint file: bad magic");
  std::uint32_t version;
  read_raw(in, version);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  std::int32_t di, wi, hi;
  std::uint32_t act;
  read_raw(in, di);
  read_raw(in, wi);
  read_raw(in, hi);
  read_raw(in, act);
  read_raw(in, c.field.arch.act_param);
  c.field.arch.input_dim = di;
  c.field.arch.width = wi;
  c.field.arch.hidden_layers = hi;
  c.field.arch.activation = static_cast<Activation>(act);
  c.field.arch.validate();
  c.field.params = read_vector(in);
  if (c.field.params.size() != c.field.arch.parameter_count())
    throw ParseError("checkpoint parameter count mismatch");
  std::uint8_t has_adam;
  read_raw(in, has_adam);
  if (has_adam) {
    AdamState s;
    read_raw(in, s.lr);
    read_raw(in, s.beta1);
    read_raw(in, s.beta2);
    read_raw(in, s.eps);
    std::int64_t step;
    read_raw(in, step);
    s.step = step;
    s.m = read_vector(in);
    s.v = read_vector(in);
    c.adam = std::move(s);
  }
  std::int64_t iter;
  read_raw(in, iter);
  c.iteration = iter;
  return c;
}

}  // namespace hotspot::field
