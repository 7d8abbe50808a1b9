#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gmmfb/codebook.hpp"
#include "gmmfb/estimators.hpp"
#include "gmmfb/evaluation.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/io.hpp"
#include "gmmfb/precoding.hpp"
#include "gmmfb/reduction.hpp"
#include "gmmfb/rng.hpp"
#include "gmmfb/scenario.hpp"

namespace fs = std::filesystem;
using namespace gmmfb;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double noise_from_snr(double snr_db, double rho) { return rho * std::pow(10.0, -snr_db / 10.0); }

// Users of one trial in user_id order, as (user_id, k_star) pairs.
std::map<int, std::map<int, int>> group_indices(const std::vector<IndexRecord>& rows) {
  std::map<int, std::map<int, int>> trials;
  for (const auto& r : rows) {
    auto [it, inserted] = trials[r.trial_id].emplace(r.user_id, r.k_star);
    if (!inserted) throw std::runtime_error("indices: duplicate (trial_id, user_id) row");
  }
  return trials;
}

void add_scenario(CLI::App& app) {
  auto* scenario = app.add_subcommand("scenario", "Synthetic channels, pilots, observations");
  scenario->require_subcommand(1);

  {
    auto* cmd = scenario->add_subcommand("generate", "Draw a spatially-correlated channel set");
    auto ntx_v = std::make_shared<int>(4);
    auto ntx_h = std::make_shared<int>(4);
    auto nrx = std::make_shared<int>(4);
    auto count = std::make_shared<int>(1000);
    auto paths = std::make_shared<int>(3);
    auto spread = std::make_shared<double>(5.0);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--ntx-v", *ntx_v, "Vertical transmit elements");
    cmd->add_option("--ntx-h", *ntx_h, "Horizontal transmit elements");
    cmd->add_option("--nrx", *nrx, "Receive elements");
    cmd->add_option("--count", *count, "Number of channel samples")->required();
    cmd->add_option("--paths", *paths, "Propagation paths per sample");
    cmd->add_option("--spread", *spread, "Angle spread in degrees");
    cmd->add_option("--seed", *seed, "Generator seed");
    cmd->add_option("--out", *out, "Output dataset file")->required();
    cmd->callback([=] {
      const ArrayGeometry g{*ntx_v, *ntx_h, *nrx};
      save_dataset(*out, generate_dataset(g, *count, *paths, *spread, *seed));
    });
  }

  {
    auto* cmd = scenario->add_subcommand("pilot", "Build an orthogonal DFT pilot configuration");
    auto ntx_v = std::make_shared<int>(4);
    auto ntx_h = std::make_shared<int>(4);
    auto nrx = std::make_shared<int>(4);
    auto n_p = std::make_shared<int>(4);
    auto snr = std::make_shared<double>(10.0);
    auto rho = std::make_shared<double>(1.0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--ntx-v", *ntx_v, "Vertical transmit elements");
    cmd->add_option("--ntx-h", *ntx_h, "Horizontal transmit elements");
    cmd->add_option("--nrx", *nrx, "Receive elements");
    cmd->add_option("--np", *n_p, "Pilot count")->required();
    cmd->add_option("--snr-db", *snr, "SNR in dB (sets the noise variance)");
    cmd->add_option("--rho", *rho, "Transmit power budget");
    cmd->add_option("--out", *out, "Output pilot-config file")->required();
    cmd->callback([=] {
      const ArrayGeometry g{*ntx_v, *ntx_h, *nrx};
      save_pilot_config(*out, build_pilot_config(g, *n_p, *snr, *rho));
    });
  }

  {
    auto* cmd = scenario->add_subcommand("observe", "Noisy pilot observations of a dataset");
    auto data = std::make_shared<std::string>();
    auto pilot = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--data", *data, "Dataset file")->required();
    cmd->add_option("--pilot-config", *pilot, "Pilot configuration file")->required();
    cmd->add_option("--seed", *seed, "Noise seed");
    cmd->add_option("--out", *out, "Output observation file")->required();
    cmd->callback([=] {
      const Dataset ds = load_dataset(*data);
      const PilotConfig pc = load_pilot_config(*pilot);
      if (!(ds.geometry == pc.geometry))
        throw std::runtime_error("observe: dataset and pilot config geometries differ");
      VectorBatch batch;
      batch.users = 1;
      batch.columns.resize(pc.obs_dim(), ds.count());
      for (int i = 0; i < ds.count(); ++i)
        batch.columns.col(i) = observe(ds.samples[i], pc, derive_seed(*seed, i, 0x6f6273ULL));
      save_vector_batch(*out, batch);
    });
  }
}

void add_gmm(CLI::App& app) {
  auto* gmm = app.add_subcommand("gmm", "Mixture fitting and reduction");
  gmm->require_subcommand(1);

  {
    auto* cmd = gmm->add_subcommand("fit", "EM fit of a channel mixture model");
    auto data = std::make_shared<std::string>();
    auto structure = std::make_shared<std::string>("kron");
    auto k = std::make_shared<int>(0);
    auto ktx = std::make_shared<int>(0);
    auto krx = std::make_shared<int>(0);
    auto max_iter = std::make_shared<int>(50);
    auto tol = std::make_shared<double>(1e-5);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--data", *data, "Training dataset file")->required();
    cmd->add_option("--structure", *structure, "full | kron | toeplitz | circulant");
    cmd->add_option("--k", *k, "Components (full structure)");
    cmd->add_option("--ktx", *ktx, "Tx-side components (kron family)");
    cmd->add_option("--krx", *krx, "Rx-side components (kron family)");
    cmd->add_option("--max-iter", *max_iter, "EM iteration cap");
    cmd->add_option("--tol", *tol, "Relative log-likelihood tolerance");
    cmd->add_option("--seed", *seed, "Initialization seed");
    cmd->add_option("--out", *out, "Output model file")->required();
    cmd->callback([=] {
      FitOptions opt;
      opt.structure.kind = covariance_kind_from_string(*structure);
      if (opt.structure.kind == CovarianceKind::full) {
        if (*k < 1) throw std::runtime_error("gmm fit: --k is required for the full structure");
        opt.components = *k;
      } else {
        if (*ktx < 1 || *krx < 1)
          throw std::runtime_error("gmm fit: --ktx and --krx are required for the kron family");
        opt.structure.tx_components = *ktx;
        opt.structure.rx_components = *krx;
        opt.components = *ktx * *krx;
      }
      opt.max_iter = *max_iter;
      opt.tol = *tol;
      opt.seed = *seed;
      save_model(*out, fit_em(load_dataset(*data), opt));
    });
  }

  {
    auto* cmd = gmm->add_subcommand("reduce", "Merge or prune a fitted mixture");
    auto model_path = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("merge");
    auto bits = std::make_shared<int>(-1);
    auto out = std::make_shared<std::string>();
    auto trace_path = std::make_shared<std::string>();
    cmd->add_option("--model", *model_path, "Input model file")->required();
    cmd->add_option("--method", *method, "merge | prune");
    cmd->add_option("--target-bits", *bits, "Feedback bits after reduction")->required();
    cmd->add_option("--out", *out, "Output model file")->required();
    cmd->add_option("--trace", *trace_path, "Merge-trace / kept-indices JSON");
    cmd->callback([=] {
      if (*bits < 0) throw std::runtime_error("gmm reduce: --target-bits must be >= 0");
      const Gmm model = load_model(*model_path);
      const int target = 1 << *bits;
      if (*method == "merge") {
        auto [reduced, trace] = merge_gmm(model, target);
        save_model(*out, reduced);
        if (!trace_path->empty()) save_merge_trace(*trace_path, trace);
      } else if (*method == "prune") {
        const PruneResult res = prune_gmm(model, target);
        save_model(*out, res.model);
        if (!trace_path->empty()) {
          nlohmann::ordered_json kept = nlohmann::ordered_json::array();
          for (int i : res.kept_indices) kept.push_back(i + 1);
          const nlohmann::ordered_json j = {
              {"version", 1}, {"kind", "prune_trace"}, {"kept", kept}};
          write_text_file(*trace_path, j.dump() + "\n");
        }
      } else {
        throw std::runtime_error("gmm reduce: unknown method '" + *method + "'");
      }
    });
  }
}

void add_codebook(CLI::App& app) {
  auto* codebook = app.add_subcommand("codebook", "Transmit-covariance codebooks");
  codebook->require_subcommand(1);

  {
    auto* cmd = codebook->add_subcommand("build", "Codebook from a mixture model");
    auto model_path = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto snr = std::make_shared<double>(10.0);
    auto rho = std::make_shared<double>(1.0);
    auto pga_iter = std::make_shared<int>(200);
    auto pga_tol = std::make_shared<double>(1e-6);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--model", *model_path, "Model file")->required();
    cmd->add_option("--data", *data, "Training dataset file")->required();
    cmd->add_option("--snr-db", *snr, "Operating SNR in dB");
    cmd->add_option("--rho", *rho, "Transmit power budget");
    cmd->add_option("--pga-max-iter", *pga_iter, "Gradient-ascent iteration cap");
    cmd->add_option("--pga-tol", *pga_tol, "Gradient-ascent relative tolerance");
    cmd->add_option("--out", *out, "Output codebook file")->required();
    cmd->callback([=] {
      PgaSettings settings;
      settings.max_iter = *pga_iter;
      settings.tol = *pga_tol;
      const Codebook cb = build_codebook(load_model(*model_path), load_dataset(*data),
                                         noise_from_snr(*snr, *rho), *rho, settings);
      save_codebook(*out, cb, file_fnv1a(*model_path));
    });
  }

  {
    auto* cmd = codebook->add_subcommand("lloyd", "k-means baseline codebook");
    auto data = std::make_shared<std::string>();
    auto entries = std::make_shared<int>(8);
    auto snr = std::make_shared<double>(10.0);
    auto rho = std::make_shared<double>(1.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto kmeans_iter = std::make_shared<int>(100);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--data", *data, "Training dataset file")->required();
    cmd->add_option("--entries", *entries, "Codebook size")->required();
    cmd->add_option("--snr-db", *snr, "Operating SNR in dB");
    cmd->add_option("--rho", *rho, "Transmit power budget");
    cmd->add_option("--seed", *seed, "Clustering seed");
    cmd->add_option("--kmeans-iter", *kmeans_iter, "k-means iteration cap");
    cmd->add_option("--out", *out, "Output codebook file")->required();
    cmd->callback([=] {
      const Codebook cb = lloyd_codebook(load_dataset(*data), *entries,
                                         noise_from_snr(*snr, *rho), *rho, *seed, {},
                                         *kmeans_iter);
      save_codebook(*out, cb, file_fnv1a(*data));
    });
  }

  {
    auto* cmd = codebook->add_subcommand("random", "Haar-random directional codebook");
    auto entries = std::make_shared<int>(8);
    auto ntx_v = std::make_shared<int>(4);
    auto ntx_h = std::make_shared<int>(4);
    auto nrx = std::make_shared<int>(4);
    auto rho = std::make_shared<double>(1.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--entries", *entries, "Codebook size")->required();
    cmd->add_option("--ntx-v", *ntx_v, "Vertical transmit elements");
    cmd->add_option("--ntx-h", *ntx_h, "Horizontal transmit elements");
    cmd->add_option("--nrx", *nrx, "Receive elements");
    cmd->add_option("--rho", *rho, "Transmit power budget");
    cmd->add_option("--seed", *seed, "Draw seed");
    cmd->add_option("--out", *out, "Output codebook file")->required();
    cmd->callback([=] {
      const ArrayGeometry g{*ntx_v, *ntx_h, *nrx};
      save_codebook(*out, random_codebook(*entries, g, *rho, *seed), 0);
    });
  }
}

void add_feedback(CLI::App& app) {
  auto* feedback = app.add_subcommand("feedback", "Feedback index selection");
  auto* cmd = feedback->add_subcommand("select", "Pick component indices from observations");
  feedback->require_subcommand(1);
  auto model_path = std::make_shared<std::string>();
  auto pilot = std::make_shared<std::string>();
  auto obs_file = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--model", *model_path, "Model file")->required();
  cmd->add_option("--pilot-config", *pilot, "Pilot configuration file")->required();
  cmd->add_option("--obs-file", *obs_file, "Observation batch file")->required();
  cmd->add_option("--out", *out, "Output indices CSV")->required();
  cmd->callback([=] {
    const Gmm model = load_model(*model_path);
    const PilotConfig pc = load_pilot_config(*pilot);
    const VectorBatch batch = load_vector_batch(*obs_file);
    if (batch.columns.rows() != pc.obs_dim())
      throw std::runtime_error("feedback select: observation dimension mismatch");
    const ObservationGmm obs = adapt_to_observations(model, pc);
    std::vector<IndexRecord> rows;
    for (Eigen::Index i = 0; i < batch.columns.cols(); ++i) {
      const FeedbackDecision d = select_from_observation(obs, batch.columns.col(i));
      rows.push_back({static_cast<int>(i) / batch.users, static_cast<int>(i) % batch.users,
                      d.index});
    }
    save_indices_csv(*out, rows);
  });
}

void add_estimate(CLI::App& app) {
  auto* cmd = app.add_subcommand("estimate", "Baseline channel estimation");
  auto method = std::make_shared<std::string>();
  auto model_path = std::make_shared<std::string>();
  auto stats_path = std::make_shared<std::string>();
  auto pilot = std::make_shared<std::string>();
  auto obs_file = std::make_shared<std::string>();
  auto sparsity = std::make_shared<int>(3);
  auto oversampling = std::make_shared<int>(2);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--method", *method, "gmm | lmmse | omp")->required();
  cmd->add_option("--model", *model_path, "Model file (gmm method)");
  cmd->add_option("--stats", *stats_path, "Training dataset for sample moments (lmmse method)");
  cmd->add_option("--pilot-config", *pilot, "Pilot configuration file")->required();
  cmd->add_option("--obs-file", *obs_file, "Observation batch file")->required();
  cmd->add_option("--sparsity", *sparsity, "Atoms to select (omp method)");
  cmd->add_option("--oversampling", *oversampling, "Dictionary grid oversampling (omp method)");
  cmd->add_option("--out", *out, "Output estimate batch file")->required();
  cmd->callback([=] {
    const PilotConfig pc = load_pilot_config(*pilot);
    const VectorBatch batch = load_vector_batch(*obs_file);
    if (batch.columns.rows() != pc.obs_dim())
      throw std::runtime_error("estimate: observation dimension mismatch");
    VectorBatch est;
    est.users = batch.users;
    est.columns.resize(pc.geometry.channel_dim(), batch.columns.cols());
    if (*method == "gmm") {
      if (model_path->empty()) throw std::runtime_error("estimate: --model required for gmm");
      const Gmm model = load_model(*model_path);
      const GmmEstimator estimator(model, pc);
      for (Eigen::Index i = 0; i < batch.columns.cols(); ++i)
        est.columns.col(i) = estimator.estimate(batch.columns.col(i));
    } else if (*method == "lmmse") {
      if (stats_path->empty()) throw std::runtime_error("estimate: --stats required for lmmse");
      const TrainStats stats = sample_statistics(load_dataset(*stats_path));
      for (Eigen::Index i = 0; i < batch.columns.cols(); ++i)
        est.columns.col(i) = estimate_lmmse(stats, pc, batch.columns.col(i));
    } else if (*method == "omp") {
      const CMat dict = build_omp_dictionary(pc.geometry, *oversampling);
      for (Eigen::Index i = 0; i < batch.columns.cols(); ++i)
        est.columns.col(i) = estimate_omp(dict, pc, batch.columns.col(i), *sparsity);
    } else {
      throw std::runtime_error("estimate: unknown method '" + *method + "'");
    }
    save_vector_batch(*out, est);
  });
}

void add_precode(CLI::App& app) {
  auto* cmd = app.add_subcommand("precode", "Multi-user precoder design from indices");
  auto method = std::make_shared<std::string>();
  auto codebook_path = std::make_shared<std::string>();
  auto model_path = std::make_shared<std::string>();
  auto indices = std::make_shared<std::string>();
  auto snr = std::make_shared<double>(10.0);
  auto rho = std::make_shared<double>(1.0);
  auto streams = std::make_shared<int>(1);
  auto max_iter = std::make_shared<int>(300);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--method", *method, "wmmse | swmmse")->required();
  cmd->add_option("--codebook", *codebook_path, "Codebook file (wmmse method)");
  cmd->add_option("--model", *model_path, "Model file (swmmse method)");
  cmd->add_option("--indices", *indices, "Feedback indices CSV")->required();
  cmd->add_option("--snr-db", *snr, "Operating SNR in dB");
  cmd->add_option("--rho", *rho, "Transmit power budget");
  cmd->add_option("--streams", *streams, "Streams per user");
  cmd->add_option("--max-iter", *max_iter, "Iteration cap");
  cmd->add_option("--seed", *seed, "Sampling seed (swmmse method)");
  cmd->add_option("--out", *out, "Output precoder batch file")->required();
  cmd->callback([=] {
    const auto trials = group_indices(load_indices_csv(*indices));
    if (trials.empty()) throw std::runtime_error("precode: no indices");
    const double noise_var = noise_from_snr(*snr, *rho);
    PrecoderBatch batch;
    if (*method == "wmmse") {
      if (codebook_path->empty()) throw std::runtime_error("precode: --codebook required");
      const Codebook cb = load_codebook(*codebook_path);
      for (const auto& [trial_id, users] : trials) {
        std::vector<CMat> reps;
        for (const auto& [user_id, k_star] : users) {
          if (k_star < 0 || k_star >= cb.size())
            throw std::runtime_error("precode: k_star outside the codebook");
          reps.push_back(cb.directional[k_star].adjoint());
        }
        batch.trials.push_back(
            wmmse(reps, noise_var, *rho, *streams, {*max_iter, 1e-6}).precoders);
      }
    } else if (*method == "swmmse") {
      if (model_path->empty()) throw std::runtime_error("precode: --model required");
      const Gmm model = load_model(*model_path);
      for (const auto& [trial_id, users] : trials) {
        std::vector<int> comps;
        for (const auto& [user_id, k_star] : users) comps.push_back(k_star);
        batch.trials.push_back(swmmse(model, comps, noise_var, *rho, *streams, *max_iter,
                                      derive_seed(*seed, trial_id, 0x7377ULL)));
      }
    } else {
      throw std::runtime_error("precode: unknown method '" + *method + "'");
    }
    save_precoders(*out, batch);
  });
}

void add_eval(CLI::App& app) {
  auto* eval = app.add_subcommand("eval", "End-to-end experiment campaigns");
  eval->require_subcommand(1);
  auto* defaults = eval->add_subcommand("defaults", "Print the default experiment config JSON");
  defaults->callback([] { std::cout << experiment_config_to_json_text({}) << "\n"; });
  for (const char* mode : {"p2p", "mu"}) {
    auto* cmd = eval->add_subcommand(
        mode, std::string(mode) == "p2p" ? "Point-to-point normalized spectral efficiency"
                                         : "Multi-user sum rate");
    auto config_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    const std::string mode_name = mode;
    cmd->add_option("--config", *config_path, "Experiment config JSON")->required();
    cmd->add_option("--out", *out_dir, "Output directory")->required();
    cmd->callback([=] {
      const ExperimentConfig cfg = experiment_config_from_json_text(read_text(*config_path));
      const std::vector<EvalRecord> records = mode_name == "p2p" ? eval_p2p(cfg) : eval_mu(cfg);
      fs::create_directories(*out_dir);
      write_text_file(fs::path(*out_dir) / "records.csv", records_to_csv(records));
      write_text_file(fs::path(*out_dir) / "summary.json", summarize_records(records));
      write_text_file(fs::path(*out_dir) / "config.json", experiment_config_to_json_text(cfg));
    });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GMM-based limited feedback for FDD MIMO: batch simulation toolkit"};
  app.require_subcommand(1);
  add_scenario(app);
  add_gmm(app);
  add_codebook(app);
  add_feedback(app);
  add_estimate(app);
  add_precode(app);
  add_eval(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
