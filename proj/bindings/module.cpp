#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hotspot/eval.hpp"
#include "hotspot/field.hpp"
#include "hotspot/geometry.hpp"
#include "hotspot/losses.hpp"
#include "hotspot/oracles.hpp"
#include "hotspot/trainer.hpp"

namespace py = pybind11;
using namespace hotspot;

PYBIND11_MODULE(_core, m) {
  m.doc() = "neural signed distance fields via a screened-Poisson heat loss";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<TrainingDivergence>(m, "TrainingDivergence", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init<>())
      .def_readwrite("points", &PointCloud::points)
      .def_readwrite("scale", &PointCloud::scale)
      .def_readwrite("offset", &PointCloud::offset)
      .def_property_readonly("dim", &PointCloud::dim)
      .def("__len__", &PointCloud::size);

  py::class_<ScalarGrid>(m, "ScalarGrid")
      .def(py::init<>())
      .def_readwrite("lower", &ScalarGrid::lower)
      .def_readwrite("upper", &ScalarGrid::upper)
      .def_readwrite("res", &ScalarGrid::res)
      .def_readwrite("dim", &ScalarGrid::dim)
      .def_readwrite("values", &ScalarGrid::values)
      .def("cell_count", &ScalarGrid::cell_count);

  py::class_<LevelSet>(m, "LevelSet")
      .def_readonly("dim", &LevelSet::dim)
      .def_readonly("vertices", &LevelSet::vertices)
      .def_readonly("segments", &LevelSet::segments)
      .def_readonly("triangles", &LevelSet::triangles);

  // geometry
  auto geo = m.def_submodule("geometry");
  py::class_<geometry::Shape>(geo, "Shape")
      .def_property_readonly("dim", &geometry::Shape::dim)
      .def("boundary_measure", &geometry::Shape::boundary_measure);
  geo.def("make_circle", &geometry::make_circle);
  geo.def("make_polygon", &geometry::make_polygon);
  geo.def("make_segment_soup", &geometry::make_segment_soup);
  geo.def("make_sphere", &geometry::make_sphere);
  geo.def("make_torus", &geometry::make_torus);
  geo.def("make_union", &geometry::make_union);
  geo.def("make_difference", &geometry::make_difference);
  geo.def("signed_distance", &geometry::signed_distance_oracle);
  geo.def("sample_boundary", &geometry::sample_boundary);
  geo.def("normalize_cloud", &geometry::normalize_cloud, py::arg("cloud"),
          py::arg("fraction") = 0.7, py::arg("radius") = 0.45);
  geo.def("extract_level_set", &geometry::extract_level_set, py::arg("grid"),
          py::arg("iso") = 0.0);
  geo.def("sample_level_set", &geometry::sample_level_set);
  geo.def("sdf_grid", &geometry::sdf_grid);
  geo.def("load_cloud", &geometry::load_cloud);
  geo.def("save_cloud", &geometry::save_cloud);
  geo.def("load_grid", &geometry::load_grid);
  geo.def("save_grid", &geometry::save_grid);

  // field
  auto fld = m.def_submodule("field");
  py::enum_<field::Activation>(fld, "Activation")
      .value("softplus", field::Activation::Softplus)
      .value("sine", field::Activation::Sine);
  py::class_<field::Architecture>(fld, "Architecture")
      .def(py::init<>())
      .def_readwrite("input_dim", &field::Architecture::input_dim)
      .def_readwrite("width", &field::Architecture::width)
      .def_readwrite("hidden_layers", &field::Architecture::hidden_layers)
      .def_readwrite("activation", &field::Architecture::activation)
      .def_readwrite("act_param", &field::Architecture::act_param)
      .def("parameter_count", &field::Architecture::parameter_count);
  py::class_<field::NeuralField>(fld, "NeuralField")
      .def_readwrite("arch", &field::NeuralField::arch)
      .def_readwrite("params", &field::NeuralField::params);
  fld.def("init_random", &field::init_random);
  fld.def("init_geometric", &field::init_geometric, py::arg("arch"), py::arg("radius"),
          py::arg("seed"), py::arg("fit_steps") = 1000, py::arg("fit_samples") = 2000,
          py::arg("fit_lr") = 2e-3);
  fld.def("forward_batch", &field::forward_batch);
  fld.def("forward_with_grad", [](const field::NeuralField& f, const Eigen::MatrixXd& x) {
    field::EvalResult r = field::forward_with_grad(f, x);
    return py::make_tuple(r.values, r.grads);
  });
  fld.def("save_checkpoint",
          [](const field::NeuralField& f, std::int64_t iteration, const std::string& path) {
            field::save_checkpoint({f, std::nullopt, iteration}, path);
          });
  fld.def("load_checkpoint", [](const std::string& path) {
    field::Checkpoint ck = field::load_checkpoint(path);
    return py::make_tuple(ck.field, ck.iteration);
  });

  // losses
  auto los = m.def_submodule("losses");
  py::class_<losses::LossConfig>(los, "LossConfig").def(py::init<>());
  los.def("parse_loss_config", &losses::parse_loss_config);
  los.def("serialize_loss_config", &losses::serialize_loss_config);
  los.def("phase_potential", &losses::phase_potential);
  los.def("phase_log_transform", &losses::phase_log_transform);

  // oracles
  auto orc = m.def_submodule("oracles");
  orc.def("bessel_k0", &oracles::bessel_k0);
  orc.def("h_point_2d", &oracles::h_point_2d);
  orc.def("h_point_3d", &oracles::h_point_3d, py::arg("r"), py::arg("eps"), py::arg("lambda_"),
          py::arg("h0") = 1.0);
  orc.def("varadhan_recover",
          py::overload_cast<double, double>(&oracles::varadhan_recover));
  py::class_<oracles::PointSourceSystem>(orc, "PointSourceSystem")
      .def_readonly("centers", &oracles::PointSourceSystem::centers)
      .def_readonly("eps", &oracles::PointSourceSystem::eps)
      .def_readonly("lambda_", &oracles::PointSourceSystem::lambda)
      .def("heat", &oracles::PointSourceSystem::heat)
      .def("min_center_distance", &oracles::PointSourceSystem::min_center_distance);
  orc.def("solve_multipoint", &oracles::solve_multipoint);
  orc.def("check_bounds", [](const oracles::PointSourceSystem& sys, const Eigen::MatrixXd& q) {
    oracles::BoundReport rep = oracles::check_bounds(sys, q);
    return py::make_tuple(rep.all_pass(), rep.entries.size());
  });

  // eval
  auto ev = m.def_submodule("eval");
  py::class_<eval::Camera>(ev, "Camera")
      .def(py::init<>())
      .def_readwrite("position", &eval::Camera::position)
      .def_readwrite("look_at", &eval::Camera::look_at)
      .def_readwrite("up", &eval::Camera::up)
      .def_readwrite("vfov_deg", &eval::Camera::vfov_deg)
      .def_readwrite("width", &eval::Camera::width)
      .def_readwrite("height", &eval::Camera::height);
  py::class_<eval::TraceResult>(ev, "TraceResult")
      .def_readonly("width", &eval::TraceResult::width)
      .def_readonly("height", &eval::TraceResult::height)
      .def_readonly("iterations", &eval::TraceResult::iterations)
      .def_readonly("hit", &eval::TraceResult::hit)
      .def_readonly("depth", &eval::TraceResult::depth)
      .def_readonly("normals", &eval::TraceResult::normals);
  py::class_<eval::TraceStats>(ev, "TraceStats")
      .def_readonly("mean_iterations", &eval::TraceStats::mean_iterations)
      .def_readonly("median_iterations", &eval::TraceStats::median_iterations)
      .def_readonly("max_iterations", &eval::TraceStats::max_iterations)
      .def_readonly("hit_ratio", &eval::TraceStats::hit_ratio);
  ev.def("grid_eval", &eval::grid_eval);
  ev.def("iou", &eval::iou);
  ev.def("chamfer_hausdorff", &eval::chamfer_hausdorff, py::arg("a"), py::arg("b"),
         py::arg("one_sided") = false);
  ev.def("sdf_metrics", [](const ScalarGrid& pred, const ScalarGrid& gt, double near_threshold) {
    eval::SdfMetrics sm = eval::sdf_metrics(pred, gt, near_threshold);
    py::dict d;
    d["rmse"] = sm.rmse;
    d["mae"] = sm.mae;
    d["smape"] = sm.smape;
    if (sm.rmse_near) d["rmse_near"] = *sm.rmse_near;
    if (sm.mae_near) d["mae_near"] = *sm.mae_near;
    if (sm.smape_near) d["smape_near"] = *sm.smape_near;
    return d;
  }, py::arg("pred"), py::arg("gt"), py::arg("near_threshold") = 0.1);
  ev.def("sphere_trace",
         py::overload_cast<const field::NeuralField&, const eval::Camera&, int, double>(
             &eval::sphere_trace),
         py::arg("field"), py::arg("camera"), py::arg("max_steps") = 30,
         py::arg("threshold") = 5e-5);
  ev.def("trace_stats", &eval::trace_stats);

  // trainer
  auto tr = m.def_submodule("trainer");
  py::class_<trainer::TrainConfig>(tr, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("arch", &trainer::TrainConfig::arch)
      .def_readwrite("iterations", &trainer::TrainConfig::iterations)
      .def_readwrite("boundary_fraction", &trainer::TrainConfig::boundary_fraction)
      .def_readwrite("n_uniform", &trainer::TrainConfig::n_uniform)
      .def_readwrite("n_gauss", &trainer::TrainConfig::n_gauss)
      .def_readwrite("sigma", &trainer::TrainConfig::sigma)
      .def_readwrite("loss", &trainer::TrainConfig::loss)
      .def_readwrite("lr", &trainer::TrainConfig::lr)
      .def_readwrite("seed", &trainer::TrainConfig::seed)
      .def_readwrite("eval_interval", &trainer::TrainConfig::eval_interval)
      .def_readwrite("geometric_init", &trainer::TrainConfig::geometric_init)
      .def_readwrite("init_radius", &trainer::TrainConfig::init_radius);
  tr.def("train", [](const PointCloud& cloud, const trainer::TrainConfig& cfg) {
    trainer::TrainResult res = trainer::train(cloud, cfg);
    std::vector<std::pair<std::int64_t, double>> history;
    for (const auto& e : res.history.entries) history.emplace_back(e.iteration, e.loss.total);
    return py::make_tuple(res.field, res.iteration, history);
  });
  tr.def("demo_1d", [](const std::string& mode, std::int64_t iterations, std::uint64_t seed) {
    trainer::Demo1dConfig cfg;
    cfg.seed = seed;
    if (iterations > 0) cfg.iterations = iterations;
    trainer::Demo1dMode m2 = mode == "eikonal_only" ? trainer::Demo1dMode::EikonalOnly
                                                    : trainer::Demo1dMode::WithHeat;
    trainer::Demo1dResult res = trainer::demo_1d(m2, cfg);
    py::dict d;
    d["final_max_error"] = res.final_max_error;
    d["error_curve"] = res.error_curve;
    d["probe_x"] = res.probe_x;
    d["probe_u"] = res.probe_u;
    d["probe_ref"] = res.probe_ref;
    return d;
  }, py::arg("mode"), py::arg("iterations") = 0, py::arg("seed") = 0);
}
