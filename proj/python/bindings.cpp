#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "hmmob/error.hpp"
#include "hmmob/experiment.hpp"
#include "hmmob/hmm.hpp"
#include "hmmob/io.hpp"
#include "hmmob/marginals.hpp"
#include "hmmob/order.hpp"
#include "hmmob/sampler.hpp"

namespace py = pybind11;
using namespace hmmob;

namespace {

// Priors and sampler settings cross the boundary as JSON text; the python
// wrapper serialises dicts so both sides share one schema.
RowPrior row_prior_arg(const std::string& text) { return row_prior_from_json(json::parse(text)); }

EmissionPrior emission_prior_arg(const std::string& text, const EmissionModel& e) {
  if (text.empty()) return default_emission_prior(e);
  return emission_prior_from_json(json::parse(text));
}

InitSpec init_arg(const std::string& kind, py::object arg) {
  if (kind == "stationary") return Stationary{};
  if (kind == "point") return PointMass{arg.cast<int>()};
  if (kind == "distribution") return InitDistribution{arg.cast<Eigen::VectorXd>()};
  throw ConfigError("init must be 'stationary', 'point' or 'distribution'");
}

}  // namespace

PYBIND11_MODULE(_hmmob, m) {
  m.doc() = "Finite-state HMM posterior order and concentration toolkit";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<UnderflowError>(m, "UnderflowError", numerical.ptr());
  py::register_exception<SamplerStuckError>(m, "SamplerStuckError", numerical.ptr());
  py::register_exception<RateConditionError>(m, "RateConditionError", base.ptr());

  py::class_<EmissionModel>(m, "EmissionModel")
      .def_static("gaussian", &EmissionModel::gaussian, py::arg("sigma"))
      .def_static("poisson", &EmissionModel::poisson)
      .def_property_readonly("family", [](const EmissionModel& e) {
        return e.family() == EmissionFamily::GaussianKnownVariance ? "gaussian" : "poisson";
      })
      .def_property_readonly("sigma", &EmissionModel::sigma)
      .def("log_density", &EmissionModel::log_density, py::arg("gamma"), py::arg("y"))
      .def("__eq__", [](const EmissionModel& a, const EmissionModel& b) { return a == b; });

  py::class_<HmmParams>(m, "HmmParams")
      .def(py::init<Eigen::MatrixXd, std::vector<double>, EmissionModel>(), py::arg("transition"),
           py::arg("gammas"), py::arg("emission"))
      .def_static("two_state", &HmmParams::two_state, py::arg("p"), py::arg("q"), py::arg("gamma1"),
                  py::arg("gamma2"), py::arg("emission"))
      .def_property_readonly("k", &HmmParams::k)
      .def_property_readonly("transition", &HmmParams::transition)
      .def_property_readonly("gammas", &HmmParams::gammas)
      .def_property_readonly("emission", &HmmParams::emission)
      .def("permuted", [](const HmmParams& t, std::vector<int> perm) { return t.permuted(perm); })
      .def("to_json", [](const HmmParams& t) { return to_json(t).dump(); })
      .def_static("from_json", [](const std::string& s) { return params_from_json(json::parse(s)); })
      .def("__eq__", [](const HmmParams& a, const HmmParams& b) { return a == b; })
      .def("__repr__", [](const HmmParams& t) { return "HmmParams(" + to_json(t).dump() + ")"; });

  py::class_<ObservationSequence>(m, "ObservationSequence")
      .def_readonly("y", &ObservationSequence::y)
      .def_readonly("x_true", &ObservationSequence::x_true)
      .def_readonly("seed", &ObservationSequence::seed)
      .def("__len__", &ObservationSequence::size);

  m.def("simulate", &simulate, py::arg("theta"), py::arg("n"), py::arg("seed"));

  m.def(
      "stationary_distribution",
      [](const HmmParams& t) {
        const StationaryDist s = stationary_distribution(t);
        return py::make_tuple(s.mu, s.unique);
      },
      py::arg("theta"), "Returns (mu, unique).");

  m.def(
      "mixing_profile",
      [](const HmmParams& t) {
        const MixingProfile p = mixing_profile(t);
        return py::dict(py::arg("s") = p.s, py::arg("rho") = p.rho, py::arg("tau") = p.tau);
      },
      py::arg("theta"));
  m.def("two_state_mixing", &two_state_mixing, py::arg("theta"));
  m.def("forgetting_rho", &forgetting_rho, py::arg("theta"));

  m.def(
      "log_likelihood",
      [](const HmmParams& t, const std::vector<double>& y, const std::string& init, py::object arg) {
        return log_likelihood(t, y, init_arg(init, arg));
      },
      py::arg("theta"), py::arg("y"), py::arg("init") = "stationary", py::arg("init_arg") = py::none());

  m.def(
      "prediction_filter",
      [](const HmmParams& t, const std::vector<double>& y) { return prediction_filter(t, y); },
      py::arg("theta"), py::arg("y"));

  m.def(
      "run_chain",
      [](const std::vector<double>& y, int k, const std::string& row_prior,
         const std::string& em_prior, const EmissionModel& emission, const std::string& sampler) {
        const SamplerConfig cfg = sampler_config_from_json(json::parse(sampler));
        PosteriorTrace trace;
        {
          py::gil_scoped_release release;
          trace = run_chain(y, k, row_prior_arg(row_prior), emission_prior_arg(em_prior, emission),
                            emission, cfg);
        }
        py::dict out;
        out["iterations"] = trace.iterations;
        out["samples"] = trace.samples;
        out["log_post"] = trace.log_post;
        out["accept_rate_rows"] = trace.accept_rate_rows;
        out["accept_rate_em"] = trace.accept_rate_em;
        out["warnings"] = trace.warnings;
        return out;
      },
      py::arg("y"), py::arg("k"), py::arg("row_prior"), py::arg("em_prior"), py::arg("emission"),
      py::arg("sampler"));

  m.def(
      "marginal_density",
      [](const HmmParams& t, int l, const std::vector<double>& y) {
        return marginal_density(t, l, y).value;
      },
      py::arg("theta"), py::arg("l"), py::arg("y"));

  m.def(
      "l1_marginal_distance",
      [](const HmmParams& a, const HmmParams& b, int l, std::size_t n_mc, std::uint64_t seed) {
        DistanceEstimate d;
        {
          py::gil_scoped_release release;
          d = l1_marginal_distance(a, b, l, n_mc, seed);
        }
        return py::make_tuple(d.value, d.std_err);
      },
      py::arg("a"), py::arg("b"), py::arg("l"), py::arg("n_mc"), py::arg("seed"),
      "Returns (value, std_err).");

  m.def(
      "threshold_schedule",
      [](std::size_t n, int k, int d, const std::string& prior) {
        return to_json(threshold_schedule(n, k, d, row_prior_arg(prior))).dump();
      },
      py::arg("n"), py::arg("k"), py::arg("d"), py::arg("row_prior"),
      "Returns the schedule as JSON text.");

  m.def(
      "merged_state_count",
      [](const HmmParams& t, double u_n, double v_n) {
        const OrderCount c = merged_state_count(t, u_n, v_n);
        return py::make_tuple(c.order, c.emptied_all);
      },
      py::arg("theta"), py::arg("u_n"), py::arg("v_n"), "Returns (L, emptied_all).");

  m.def(
      "posterior_order",
      [](const std::vector<HmmParams>& samples, std::size_t n, int d, const std::string& prior) {
        const ThresholdSchedule s = threshold_schedule(n, samples.at(0).k(), d, row_prior_arg(prior));
        const OrderPosterior op = posterior_order(samples, s);
        return py::make_tuple(op.pmf, op.mode);
      },
      py::arg("samples"), py::arg("n"), py::arg("d"), py::arg("row_prior"),
      "Returns (pmf, mode).");

  m.def(
      "config_hash",
      [](const std::string& text) { return config_hash(config_from_json(json::parse(text))); },
      py::arg("config_json"));
}
