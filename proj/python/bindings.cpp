#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "moecap/cap.hpp"
#include "moecap/cli.hpp"
#include "moecap/costing.hpp"
#include "moecap/error.hpp"
#include "moecap/model.hpp"
#include "moecap/planner.hpp"
#include "moecap/report.hpp"
#include "moecap/routing.hpp"

namespace py = pybind11;
using namespace moecap;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string dumps(const nlohmann::json& j) { return j.dump(); }

ActivationMode parse_mode(const std::string& mode, std::uint64_t batch, const std::string& dist) {
  if (mode == "batch1") return Batch1Analytic{};
  if (mode == "full") return FullActivation{};
  if (mode == "expected") return ExpectedActivation{batch, RoutingDistribution::parse(dist)};
  throw ValidationError("mode", "unknown activation mode '" + mode + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MoE deployment analysis core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);

  py::class_<ModelDescriptor>(m, "ModelDescriptor")
      .def_readonly("name", &ModelDescriptor::name)
      .def_readonly("n_layer", &ModelDescriptor::n_layer)
      .def_readonly("n_expert", &ModelDescriptor::n_expert)
      .def_readonly("top_k", &ModelDescriptor::top_k)
      .def_readonly("n_shared", &ModelDescriptor::n_shared)
      .def("total_params", [](const ModelDescriptor& d, bool emb) { return total_params(d, {emb}); },
           py::arg("include_embeddings") = true)
      .def("active_params", [](const ModelDescriptor& d, bool emb) { return active_params_analytic(d, {emb}); },
           py::arg("include_embeddings") = true)
      .def("sparse_flops_per_token", &sparse_flops_per_token, py::arg("seq_len") = 1)
      .def("to_json", [](const ModelDescriptor& d) { return dumps(to_json(d)); });

  m.def("load_model", [](const std::string& path) { return load_model_descriptor_file(path); }, py::arg("path"));

  m.def(
      "plan_requirement",
      [](const ModelDescriptor& d, const std::string& precision, double slo, double efficiency,
         const std::string& mode, std::uint64_t batch, const std::string& dist) {
        RequirementOptions o;
        o.efficiency_mbu = efficiency;
        return dumps(to_json(plan_requirement(d, Precision::parse(precision), {slo}, parse_mode(mode, batch, dist), o)));
      },
      py::arg("model"), py::arg("precision") = "int8", py::arg("slo") = 0.1, py::arg("efficiency") = 0.3558,
      py::arg("mode") = "batch1", py::arg("batch") = 1, py::arg("dist") = "uniform");

  m.def(
      "expected_distinct_experts",
      [](std::uint32_t e, std::uint32_t k, std::uint64_t batch, std::optional<std::vector<double>> weights) {
        const auto dist = weights ? RoutingDistribution::empirical(*weights) : RoutingDistribution::uniform();
        const auto r = expected_distinct_experts(e, k, batch, dist);
        return py::make_tuple(r.mean, r.variance);
      },
      py::arg("n_expert"), py::arg("top_k"), py::arg("batch"), py::arg("weights") = py::none());

  m.def(
      "cost_per_token",
      [](double hardware_usd, double power_watts, double runtime_hours, double price_per_kwh, double throughput) {
        BillOfMaterials bom;
        bom.gpu = hardware_usd;
        PowerProfile power;
        power.gpu = power_watts;
        DeploymentEconomics econ;
        econ.runtime_hours = runtime_hours;
        econ.energy_price_per_kwh = price_per_kwh;
        econ.token_throughput = throughput;
        return cost_per_token(bom, power, econ);
      },
      py::arg("hardware_usd"), py::arg("power_watts"), py::arg("runtime_hours"), py::arg("price_per_kwh"),
      py::arg("tokens_per_s"));

  m.def(
      "classify_records",
      [](const std::string& records_json) {
        const auto ds = normalize_radar(cap_records_from_json(nlohmann::json::parse(records_json)));
        return dumps(to_json(ds, classify_tradeoff(ds)));
      },
      py::arg("records_json"));

  m.def(
      "recommend",
      [](const std::string& rules_path, const std::string& tier, std::uint64_t batch, const std::string& primary,
         const std::string& secondary) {
        const auto rules = load_rules_file(rules_path);
        return dumps(to_json(
            recommend(rules, {parse_device_class(tier), batch, parse_constraint(primary), parse_constraint(secondary)})));
      },
      py::arg("rules_path"), py::arg("tier"), py::arg("batch"), py::arg("primary"), py::arg("secondary"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));

  m.def("data_dir", [] { return cli::data_dir().string(); });
}
