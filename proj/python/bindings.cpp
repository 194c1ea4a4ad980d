#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pseudopanel/datagen.hpp"
#include "pseudopanel/diagnostics.hpp"
#include "pseudopanel/econometrics.hpp"
#include "pseudopanel/error.hpp"
#include "pseudopanel/pipeline.hpp"

namespace py = pybind11;
namespace pp = pseudopanel;

namespace {

py::dict wave_dict(const pp::cohort::Wave& wave, const std::vector<int>& labels) {
  const auto n = static_cast<Eigen::Index>(wave.size());
  Eigen::MatrixXd shares(n, static_cast<Eigen::Index>(pp::kFunctions));
  Eigen::VectorXd y(n), age(n), size(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = wave[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < pp::kFunctions; ++j) shares(i, static_cast<Eigen::Index>(j)) = r.shares[j];
    y(i) = r.total_expenditure;
    age(i) = r.age;
    size(i) = r.size_oxford;
  }
  py::dict d;
  d["shares"] = shares;
  d["total_expenditure"] = y;
  d["age"] = age;
  d["size_oxford"] = size;
  d["label"] = labels;
  return d;
}

py::dict estimate_dict(const pp::econometrics::FunctionEstimate& e) {
  py::dict d;
  d["function"] = std::string(pp::kFunctionCodes[e.function]);
  d["elasticity"] = e.elasticity.elasticity;
  d["std_error"] = e.elasticity.std_error;
  d["student"] = e.elasticity.t_stat;
  d["form"] = pp::econometrics::to_string(e.choice.chosen.form);
  d["effects"] = pp::econometrics::to_string(e.choice.chosen.effects);
  d["hausman_p"] = e.choice.chosen_form().hausman.p_value;
  d["fisher_p"] = e.choice.chosen_form().fisher.p_value;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pseudo-panel construction with self-organizing maps and share-equation estimation";

  static py::exception<pp::Error> error(m, "PseudoPanelError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pp::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("FUNCTIONS") = std::vector<std::string>(pp::kFunctionCodes.begin(), pp::kFunctionCodes.end());

  m.def(
      "simulate",
      [](std::uint64_t seed) {
        const auto pop = pp::datagen::generate(pp::datagen::default_population(seed));
        py::dict out;
        for (std::size_t t = 0; t < pop.waves.size(); ++t)
          out[py::int_(pop.truth.wave_years[t])] = wave_dict(pop.waves[t], pop.truth.labels[t]);
        return out;
      },
      py::arg("seed") = 1982, "Default synthetic population: {year: {shares, total_expenditure, age, size_oxford, label}}");

  m.def(
      "true_elasticities",
      [](std::uint64_t seed) {
        const auto truth = pp::datagen::ground_truth(pp::datagen::default_population(seed));
        return std::vector<double>(truth.elasticity.begin(), truth.elasticity.end());
      },
      py::arg("seed") = 1982);

  m.def(
      "analyze",
      [](std::uint64_t seed, long min_cell_size) {
        pp::pipeline::RunConfig cfg;
        pp::pipeline::set_seed(cfg, seed);
        cfg.min_cell_size = min_cell_size;
        const auto pop = pp::datagen::generate(cfg.population);
        const auto a = pp::pipeline::analyze(pop.waves, cfg);
        py::list rows;
        for (const auto& e : a.estimates) rows.append(estimate_dict(e));
        return rows;
      },
      py::arg("seed") = 1982, py::arg("min_cell_size") = 100,
      "Simulate, fit the map, build the panel and estimate every function in memory");

  m.def(
      "run_all",
      [](const std::filesystem::path& out_dir, std::uint64_t seed) {
        pp::pipeline::RunConfig cfg;
        pp::pipeline::set_seed(cfg, seed);
        cfg.out_dir = out_dir;
        pp::pipeline::run_all(cfg);
      },
      py::arg("out_dir"), py::arg("seed") = 1982);

  m.def(
      "within_total_share",
      [](const std::vector<double>& values, const std::vector<Eigen::Index>& groups) {
        return pp::diagnostics::within_total_share(values, groups);
      },
      py::arg("values"), py::arg("groups"));

  m.def(
      "wilks_lambda",
      [](const Eigen::MatrixXd& data, const std::vector<Eigen::Index>& groups) {
        const auto w = pp::diagnostics::wilks_lambda(data, groups);
        py::dict d;
        d["lambda"] = w.lambda;
        d["f"] = w.f.f;
        d["df1"] = w.f.df1;
        d["df2"] = w.f.df2;
        return d;
      },
      py::arg("data"), py::arg("groups"));

  m.def("elasticity", &pp::econometrics::elasticity_value, py::arg("b1"), py::arg("b2"), py::arg("w_mean"),
        py::arg("log_y_mean"));
}
