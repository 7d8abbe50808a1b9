#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "gmmfb/codebook.hpp"
#include "gmmfb/estimators.hpp"
#include "gmmfb/evaluation.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/io.hpp"
#include "gmmfb/precoding.hpp"
#include "gmmfb/reduction.hpp"
#include "gmmfb/scenario.hpp"

namespace py = pybind11;
using namespace gmmfb;

namespace {

FitOptions make_fit_options(const std::string& structure, int k, int ktx, int krx, int max_iter,
                            double tol, std::uint64_t seed) {
  FitOptions opt;
  opt.structure.kind = covariance_kind_from_string(structure);
  if (opt.structure.kind == CovarianceKind::full) {
    if (k < 1) throw std::invalid_argument("fit_em: k >= 1 required for the full structure");
    opt.components = k;
  } else {
    if (ktx < 1 || krx < 1)
      throw std::invalid_argument("fit_em: ktx and krx >= 1 required for the kron family");
    opt.structure.tx_components = ktx;
    opt.structure.rx_components = krx;
    opt.components = ktx * krx;
  }
  opt.max_iter = max_iter;
  opt.tol = tol;
  opt.seed = seed;
  return opt;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GMM-based limited feedback for FDD MIMO systems";

  py::class_<ArrayGeometry>(m, "ArrayGeometry")
      .def(py::init([](int tx_v, int tx_h, int n_rx) {
             ArrayGeometry g{tx_v, tx_h, n_rx};
             g.validate();
             return g;
           }),
           py::arg("tx_v"), py::arg("tx_h"), py::arg("n_rx"))
      .def_readonly("tx_vertical", &ArrayGeometry::tx_vertical)
      .def_readonly("tx_horizontal", &ArrayGeometry::tx_horizontal)
      .def_readonly("rx_elements", &ArrayGeometry::rx_elements)
      .def_property_readonly("tx_total", &ArrayGeometry::tx_total)
      .def_property_readonly("channel_dim", &ArrayGeometry::channel_dim);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("count", &Dataset::count)
      .def_readonly("geometry", &Dataset::geometry)
      .def_readonly("normalization_scale", &Dataset::normalization_scale)
      .def("matrix", [](const Dataset& d, int i) { return d.samples.at(i).matrix; })
      .def("vector", [](const Dataset& d, int i) { return CVec(d.samples.at(i).vectorized()); });

  py::class_<PilotConfig>(m, "PilotConfig")
      .def_readonly("n_p", &PilotConfig::n_p)
      .def_readonly("snr_db", &PilotConfig::snr_db)
      .def_readonly("power_budget", &PilotConfig::power_budget)
      .def_readonly("noise_variance", &PilotConfig::noise_variance)
      .def_readonly("pilots", &PilotConfig::pilots)
      .def_readonly("observation_op", &PilotConfig::observation_op)
      .def_property_readonly("obs_dim", &PilotConfig::obs_dim);

  py::class_<Gmm>(m, "Gmm")
      .def_property_readonly("k", &Gmm::size)
      .def_property_readonly("dim", &Gmm::dim)
      .def_property_readonly("structure",
                             [](const Gmm& g) { return to_string(g.structure().kind); })
      .def("weights", [](const Gmm& g) { return RVec(g.weights()); })
      .def("mean", [](const Gmm& g, int k) { return CVec(g.component(k).mean); })
      .def("cov", [](const Gmm& g, int k) { return CMat(g.component(k).cov); })
      .def("responsibilities", [](const Gmm& g, const CVec& x) { return g.responsibilities(x); })
      .def("log_density", [](const Gmm& g, const CVec& x) { return g.log_density(x); })
      .def("sample",
           [](const Gmm& g, int component, std::uint64_t seed) {
             return sample_component(g, component, seed);
           })
      .def_property_readonly("em_iters", [](const Gmm& g) { return g.fit_info().em_iters; })
      .def_property_readonly("final_loglik",
                             [](const Gmm& g) { return g.fit_info().final_loglik; });

  py::class_<ObservationGmm>(m, "ObservationGmm")
      .def_property_readonly("k", &ObservationGmm::size)
      .def_property_readonly("noise_variance", &ObservationGmm::noise_variance)
      .def("responsibilities",
           [](const ObservationGmm& g, const CVec& y) { return g.responsibilities(y); });

  py::class_<Codebook>(m, "Codebook")
      .def_property_readonly("k", &Codebook::size)
      .def_readonly("power_budget", &Codebook::power_budget)
      .def("entry", [](const Codebook& c, int k) { return c.entries.at(k); })
      .def("directional", [](const Codebook& c, int k) { return c.directional.at(k); })
      .def_property_readonly("has_entries",
                             [](const Codebook& c) { return !c.entries.empty(); });

  m.def(
      "generate_dataset",
      [](const ArrayGeometry& g, int count, int paths, double spread_deg, std::uint64_t seed) {
        return generate_dataset(g, count, paths, spread_deg, seed);
      },
      py::arg("geometry"), py::arg("count"), py::arg("paths") = 3,
      py::arg("spread_deg") = 5.0, py::arg("seed") = 1);

  m.def(
      "build_pilot_config",
      [](const ArrayGeometry& g, int n_p, double snr_db, double rho) {
        return build_pilot_config(g, n_p, snr_db, rho);
      },
      py::arg("geometry"), py::arg("n_p"), py::arg("snr_db"), py::arg("power_budget") = 1.0);

  m.def(
      "observe",
      [](const CMat& channel, const PilotConfig& config, std::uint64_t seed) {
        return observe(ChannelSample{channel}, config, seed);
      },
      py::arg("channel"), py::arg("config"), py::arg("seed"));

  m.def(
      "fit_em",
      [](const Dataset& data, const std::string& structure, int k, int ktx, int krx,
         int max_iter, double tol, std::uint64_t seed) {
        return fit_em(data, make_fit_options(structure, k, ktx, krx, max_iter, tol, seed));
      },
      py::arg("data"), py::arg("structure") = "full", py::arg("k") = 0, py::arg("ktx") = 0,
      py::arg("krx") = 0, py::arg("max_iter") = 50, py::arg("tol") = 1e-5, py::arg("seed") = 0);

  m.def(
      "parameter_count",
      [](const std::string& structure, const ArrayGeometry& g, int k, int ktx, int krx) {
        CovarianceStructure st{covariance_kind_from_string(structure), ktx, krx};
        return parameter_count(st, g, k);
      },
      py::arg("structure"), py::arg("geometry"), py::arg("k"), py::arg("ktx") = 0,
      py::arg("krx") = 0);

  m.def("adapt_to_observations", &adapt_to_observations, py::arg("model"), py::arg("config"));

  m.def(
      "merge_gmm",
      [](const Gmm& model, int target) {
        auto [reduced, trace] = merge_gmm(model, target);
        std::vector<std::tuple<int, int, double>> steps;
        for (const auto& s : trace.steps)
          steps.emplace_back(s.index_a, s.index_b, s.dissimilarity);
        return py::make_tuple(reduced, steps);
      },
      py::arg("model"), py::arg("target"));

  m.def(
      "prune_gmm",
      [](const Gmm& model, int target) {
        const PruneResult res = prune_gmm(model, target);
        return py::make_tuple(res.model, res.kept_indices);
      },
      py::arg("model"), py::arg("target"));

  m.def("spectral_efficiency", &spectral_efficiency, py::arg("channel"), py::arg("tx_cov"),
        py::arg("noise_var"));

  m.def(
      "water_filling",
      [](const CMat& channel, double noise_var, double rho) {
        const WaterFillingResult r = water_filling(channel, noise_var, rho);
        return py::make_tuple(r.q_opt, r.rate, r.degenerate);
      },
      py::arg("channel"), py::arg("noise_var"), py::arg("power_budget"));

  m.def(
      "build_codebook",
      [](const Gmm& model, const Dataset& data, double noise_var, double rho) {
        return build_codebook(model, data, noise_var, rho);
      },
      py::arg("model"), py::arg("data"), py::arg("noise_var"), py::arg("power_budget"));

  m.def(
      "lloyd_codebook",
      [](const Dataset& data, int entries, double noise_var, double rho, std::uint64_t seed) {
        return lloyd_codebook(data, entries, noise_var, rho, seed);
      },
      py::arg("data"), py::arg("entries"), py::arg("noise_var"), py::arg("power_budget"),
      py::arg("seed"));

  m.def(
      "random_codebook",
      [](int entries, const ArrayGeometry& g, double rho, std::uint64_t seed) {
        return random_codebook(entries, g, rho, seed);
      },
      py::arg("entries"), py::arg("geometry"), py::arg("power_budget"), py::arg("seed"));

  m.def("discard_entries", &discard_entries, py::arg("codebook"), py::arg("kept_indices"));

  m.def(
      "select_from_observation",
      [](const ObservationGmm& obs, const CVec& y) {
        const FeedbackDecision d = select_from_observation(obs, y);
        return py::make_tuple(d.index, d.responsibilities);
      },
      py::arg("obs_model"), py::arg("y"));

  m.def(
      "select_from_channel",
      [](const Gmm& model, const CVec& h) {
        const FeedbackDecision d = select_from_channel(model, h);
        return py::make_tuple(d.index, d.responsibilities);
      },
      py::arg("model"), py::arg("h"));

  m.def("estimate_gmm", &estimate_gmm, py::arg("model"), py::arg("config"), py::arg("y"));

  m.def(
      "estimate_lmmse",
      [](const Dataset& train, const PilotConfig& config, const CVec& y) {
        return estimate_lmmse(sample_statistics(train), config, y);
      },
      py::arg("train"), py::arg("config"), py::arg("y"));

  m.def("build_omp_dictionary", &build_omp_dictionary, py::arg("geometry"),
        py::arg("oversampling") = 2);
  m.def(
      "estimate_omp",
      [](const CMat& dictionary, const PilotConfig& config, const CVec& y, int sparsity) {
        return estimate_omp(dictionary, config, y, sparsity);
      },
      py::arg("dictionary"), py::arg("config"), py::arg("y"), py::arg("sparsity"));

  m.def(
      "wmmse",
      [](const std::vector<CMat>& channels, double noise_var, double rho, int streams,
         int max_iter) {
        const WmmseResult r = wmmse(channels, noise_var, rho, streams, {max_iter, 1e-6});
        return py::make_tuple(r.precoders.precoders, r.rate_trace);
      },
      py::arg("design_channels"), py::arg("noise_var"), py::arg("power_budget"),
      py::arg("streams") = 1, py::arg("max_iter") = 300);

  m.def(
      "swmmse",
      [](const Gmm& model, const std::vector<int>& components, double noise_var, double rho,
         int streams, int max_iter, std::uint64_t seed) {
        return swmmse(model, components, noise_var, rho, streams, max_iter, seed).precoders;
      },
      py::arg("model"), py::arg("components"), py::arg("noise_var"), py::arg("power_budget"),
      py::arg("streams") = 1, py::arg("max_iter") = 300, py::arg("seed") = 0);

  m.def(
      "sum_rate",
      [](const std::vector<CMat>& channels, const std::vector<CMat>& precoders, double rho,
         double noise_var) {
        PrecoderSet set;
        set.precoders = precoders;
        set.power_budget = rho;
        return sum_rate(channels, set, noise_var);
      },
      py::arg("true_channels"), py::arg("precoders"), py::arg("power_budget"),
      py::arg("noise_var"));

  m.def("eval_p2p_csv", [](const std::string& config_json) {
    return records_to_csv(eval_p2p(experiment_config_from_json_text(config_json)));
  });
  m.def("eval_mu_csv", [](const std::string& config_json) {
    return records_to_csv(eval_mu(experiment_config_from_json_text(config_json)));
  });
  m.def("default_config_json", [] { return experiment_config_to_json_text({}); });

  m.def("save_dataset",
        [](const std::string& path, const Dataset& d) { save_dataset(path, d); });
  m.def("load_dataset", [](const std::string& path) { return load_dataset(path); });
  m.def("save_model", [](const std::string& path, const Gmm& g) { save_model(path, g); });
  m.def("load_model", [](const std::string& path) { return load_model(path); });
}
