#include "gmmfb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "gmmfb/estimators.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/precoding.hpp"
#include "gmmfb/reduction.hpp"
#include "gmmfb/rng.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument("experiment config: '" + where + "' must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("experiment config: unknown key '" + item.key() + "' in " +
                                  where);
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

int bits_for(int components) {
  int bits = 0;
  while ((1 << bits) < components) ++bits;
  return bits;
}

FitOptions fit_options_of(const ExperimentConfig& config) {
  FitOptions opt;
  opt.structure.kind = covariance_kind_from_string(config.gmm.structure);
  if (opt.structure.kind == CovarianceKind::full) {
    opt.components = config.gmm.k;
  } else {
    opt.structure.tx_components = config.gmm.k_tx;
    opt.structure.rx_components = config.gmm.k_rx;
    opt.components = config.gmm.k_tx * config.gmm.k_rx;
  }
  opt.max_iter = config.gmm.max_iter;
  opt.tol = config.gmm.tol;
  opt.seed = config.gmm.seed;
  return opt;
}

Gmm reduced_model(const ExperimentConfig& config, const Dataset& train) {
  Gmm model = fit_em(train, fit_options_of(config));
  const auto& red = config.reduction;
  if (red.method == "none" || red.target_bits < 0) return model;
  const int target = 1 << red.target_bits;
  if (target >= model.size()) return model;
  if (red.method == "merge") return merge_gmm(model, target).first;
  if (red.method == "prune") return prune_gmm(model, target).model;
  throw std::invalid_argument("experiment config: unknown reduction method '" + red.method + "'");
}

std::vector<std::string> resolve_methods(const std::vector<std::string>& requested,
                                         const std::vector<std::string>& allowed) {
  if (requested.empty()) return allowed;
  for (const auto& m : requested)
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
      throw std::invalid_argument("experiment config: unknown method '" + m + "'");
  return requested;
}

bool wants(const std::vector<std::string>& methods, const std::string& name) {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

CMat reshape_channel(const CVec& v, const ArrayGeometry& g) {
  return Eigen::Map<const CMat>(v.data(), g.rx_elements, g.tx_total());
}

// Transmit covariance carried by a directional-only codebook entry: uniform
// power over the factor's columns.
CMat directional_cov(const CMat& x, double power_budget) {
  return (power_budget / static_cast<double>(x.cols())) * (x * x.adjoint());
}

double guarded_ratio(double rate, double oracle_rate) {
  const double ratio = rate / oracle_rate;
  if (ratio > 1.0 + 1e-6)
    throw std::runtime_error("evaluation: spectral efficiency exceeded the capacity oracle");
  return std::min(ratio, 1.0);
}

}  // namespace

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("experiment config: invalid JSON: ") + e.what());
  }
  check_keys(j,
             {"scenario", "gmm", "reduction", "pga", "mu", "n_p", "snr_db", "methods",
              "power_budget", "trial_seed", "lloyd_seed", "random_seed", "lloyd_max_iter",
              "omp_sparsity", "omp_oversampling"},
             "top level");

  ExperimentConfig c;
  if (j.contains("scenario")) {
    const json& s = j.at("scenario");
    check_keys(s,
               {"tx_v", "tx_h", "n_rx", "train_count", "eval_count", "paths", "spread_deg",
                "train_seed", "eval_seed"},
               "scenario");
    maybe(s, "tx_v", c.scenario.tx_v);
    maybe(s, "tx_h", c.scenario.tx_h);
    maybe(s, "n_rx", c.scenario.n_rx);
    maybe(s, "train_count", c.scenario.train_count);
    maybe(s, "eval_count", c.scenario.eval_count);
    maybe(s, "paths", c.scenario.paths);
    maybe(s, "spread_deg", c.scenario.spread_deg);
    maybe(s, "train_seed", c.scenario.train_seed);
    maybe(s, "eval_seed", c.scenario.eval_seed);
  }
  if (j.contains("gmm")) {
    const json& s = j.at("gmm");
    check_keys(s, {"structure", "k", "k_tx", "k_rx", "max_iter", "tol", "seed"}, "gmm");
    maybe(s, "structure", c.gmm.structure);
    maybe(s, "k", c.gmm.k);
    maybe(s, "k_tx", c.gmm.k_tx);
    maybe(s, "k_rx", c.gmm.k_rx);
    maybe(s, "max_iter", c.gmm.max_iter);
    maybe(s, "tol", c.gmm.tol);
    maybe(s, "seed", c.gmm.seed);
  }
  if (j.contains("reduction")) {
    const json& s = j.at("reduction");
    check_keys(s, {"method", "target_bits"}, "reduction");
    maybe(s, "method", c.reduction.method);
    maybe(s, "target_bits", c.reduction.target_bits);
  }
  if (j.contains("pga")) {
    const json& s = j.at("pga");
    check_keys(s, {"max_iter", "tol", "init_step", "backtrack", "max_backtracks", "armijo_c"},
               "pga");
    maybe(s, "max_iter", c.pga.max_iter);
    maybe(s, "tol", c.pga.tol);
    maybe(s, "init_step", c.pga.init_step);
    maybe(s, "backtrack", c.pga.backtrack);
    maybe(s, "max_backtracks", c.pga.max_backtracks);
    maybe(s, "armijo_c", c.pga.armijo_c);
  }
  if (j.contains("mu")) {
    const json& s = j.at("mu");
    check_keys(s, {"users", "constellations", "streams", "wmmse_max_iter", "swmmse_max_iter",
                   "seed"},
               "mu");
    maybe(s, "users", c.mu.users);
    maybe(s, "constellations", c.mu.constellations);
    maybe(s, "streams", c.mu.streams);
    maybe(s, "wmmse_max_iter", c.mu.wmmse_max_iter);
    maybe(s, "swmmse_max_iter", c.mu.swmmse_max_iter);
    maybe(s, "seed", c.mu.seed);
  }
  maybe(j, "n_p", c.n_p);
  maybe(j, "snr_db", c.snr_db);
  maybe(j, "methods", c.methods);
  maybe(j, "power_budget", c.power_budget);
  maybe(j, "trial_seed", c.trial_seed);
  maybe(j, "lloyd_seed", c.lloyd_seed);
  maybe(j, "random_seed", c.random_seed);
  maybe(j, "lloyd_max_iter", c.lloyd_max_iter);
  maybe(j, "omp_sparsity", c.omp_sparsity);
  maybe(j, "omp_oversampling", c.omp_oversampling);

  c.scenario.geometry().validate();
  if (c.scenario.train_count < 1 || c.scenario.eval_count < 1 || c.scenario.paths < 1)
    throw std::invalid_argument("experiment config: counts must be positive");
  if (c.gmm.max_iter < 1 || c.gmm.tol <= 0.0)
    throw std::invalid_argument("experiment config: bad EM settings");
  if (c.power_budget <= 0.0)
    throw std::invalid_argument("experiment config: power budget must be positive");
  if (c.n_p.empty() || c.snr_db.empty())
    throw std::invalid_argument("experiment config: n_p and snr_db must be non-empty");
  for (int n_p : c.n_p)
    if (n_p < 1 || n_p > c.scenario.geometry().tx_total())
      throw std::invalid_argument("experiment config: n_p out of range");
  covariance_kind_from_string(c.gmm.structure);
  return c;
}

std::string experiment_config_to_json_text(const ExperimentConfig& c) {
  ordered_json j;
  j["scenario"] = {{"tx_v", c.scenario.tx_v},         {"tx_h", c.scenario.tx_h},
                   {"n_rx", c.scenario.n_rx},         {"train_count", c.scenario.train_count},
                   {"eval_count", c.scenario.eval_count}, {"paths", c.scenario.paths},
                   {"spread_deg", c.scenario.spread_deg}, {"train_seed", c.scenario.train_seed},
                   {"eval_seed", c.scenario.eval_seed}};
  j["gmm"] = {{"structure", c.gmm.structure}, {"k", c.gmm.k},     {"k_tx", c.gmm.k_tx},
              {"k_rx", c.gmm.k_rx},           {"max_iter", c.gmm.max_iter},
              {"tol", c.gmm.tol},             {"seed", c.gmm.seed}};
  j["reduction"] = {{"method", c.reduction.method}, {"target_bits", c.reduction.target_bits}};
  j["pga"] = {{"max_iter", c.pga.max_iter},
              {"tol", c.pga.tol},
              {"init_step", c.pga.init_step},
              {"backtrack", c.pga.backtrack},
              {"max_backtracks", c.pga.max_backtracks},
              {"armijo_c", c.pga.armijo_c}};
  j["mu"] = {{"users", c.mu.users},
             {"constellations", c.mu.constellations},
             {"streams", c.mu.streams},
             {"wmmse_max_iter", c.mu.wmmse_max_iter},
             {"swmmse_max_iter", c.mu.swmmse_max_iter},
             {"seed", c.mu.seed}};
  j["n_p"] = c.n_p;
  j["snr_db"] = c.snr_db;
  j["methods"] = c.methods;
  j["power_budget"] = c.power_budget;
  j["trial_seed"] = c.trial_seed;
  j["lloyd_seed"] = c.lloyd_seed;
  j["random_seed"] = c.random_seed;
  j["lloyd_max_iter"] = c.lloyd_max_iter;
  j["omp_sparsity"] = c.omp_sparsity;
  j["omp_oversampling"] = c.omp_oversampling;
  return j.dump(2) + "\n";
}

std::vector<EvalRecord> eval_p2p(const ExperimentConfig& config) {
  const std::vector<std::string> methods =
      resolve_methods(config.methods, {"gmm-obs", "gmm-pcsi", "lloyd-lmmse", "lloyd-omp",
                                       "lloyd-gmm", "random-entry", "oracle-wf"});
  const ArrayGeometry g = config.scenario.geometry();
  const double rho = config.power_budget;

  const Dataset train = generate_dataset(g, config.scenario.train_count, config.scenario.paths,
                                         config.scenario.spread_deg, config.scenario.train_seed);
  const Dataset eval = generate_dataset(g, config.scenario.eval_count, config.scenario.paths,
                                        config.scenario.spread_deg, config.scenario.eval_seed);
  const Gmm model = reduced_model(config, train);
  const int k = model.size();
  const int bits = bits_for(k);

  const bool need_gmm_cb = wants(methods, "gmm-obs") || wants(methods, "gmm-pcsi");
  const bool need_lloyd_cb =
      wants(methods, "lloyd-lmmse") || wants(methods, "lloyd-omp") || wants(methods, "lloyd-gmm");
  const bool need_obs = wants(methods, "gmm-obs") || wants(methods, "lloyd-lmmse") ||
                        wants(methods, "lloyd-omp") || wants(methods, "lloyd-gmm");

  TrainStats stats;
  if (wants(methods, "lloyd-lmmse")) stats = sample_statistics(train);
  CMat dictionary;
  if (wants(methods, "lloyd-omp")) dictionary = build_omp_dictionary(g, config.omp_oversampling);
  Codebook random_cb;
  if (wants(methods, "random-entry")) random_cb = random_codebook(k, g, rho, config.random_seed);

  std::vector<EvalRecord> records;
  for (std::size_t si = 0; si < config.snr_db.size(); ++si) {
    const double snr_db = config.snr_db[si];
    const double noise_var = rho * std::pow(10.0, -snr_db / 10.0);

    Codebook gmm_cb, lloyd_cb;
    if (need_gmm_cb) gmm_cb = build_codebook(model, train, noise_var, rho, config.pga);
    if (need_lloyd_cb)
      lloyd_cb = lloyd_codebook(train, k, noise_var, rho, config.lloyd_seed, config.pga,
                                config.lloyd_max_iter);

    std::vector<double> oracle(eval.count());
    for (int t = 0; t < eval.count(); ++t)
      oracle[t] = water_filling(eval.samples[t].matrix, noise_var, rho).rate;

    for (std::size_t pi = 0; pi < config.n_p.size(); ++pi) {
      const int n_p = config.n_p[pi];
      const std::uint64_t cell = si * config.n_p.size() + pi;
      const PilotConfig pc = build_pilot_config(g, n_p, snr_db, rho);

      ObservationGmm obs;
      if (wants(methods, "gmm-obs")) obs = adapt_to_observations(model, pc);
      std::unique_ptr<GmmEstimator> gmm_est;
      if (wants(methods, "lloyd-gmm")) gmm_est = std::make_unique<GmmEstimator>(model, pc);

      for (int t = 0; t < eval.count(); ++t) {
        const ChannelSample& ch = eval.samples[t];
        if (!(oracle[t] > 1e-9)) continue;

        CVec y;
        if (need_obs) y = observe(ch, pc, derive_seed(config.trial_seed, t, cell));

        for (const auto& name : methods) {
          double value = 0.0;
          if (name == "oracle-wf") {
            value = 1.0;
          } else if (name == "gmm-obs") {
            const int idx = select_from_observation(obs, y).index;
            value = guarded_ratio(spectral_efficiency(ch.matrix, gmm_cb.entries[idx], noise_var),
                                  oracle[t]);
          } else if (name == "gmm-pcsi") {
            const int idx = select_from_channel(model, ch.vectorized()).index;
            value = guarded_ratio(spectral_efficiency(ch.matrix, gmm_cb.entries[idx], noise_var),
                                  oracle[t]);
          } else if (name == "lloyd-lmmse") {
            const CMat est = reshape_channel(estimate_lmmse(stats, pc, y), g);
            const int idx = select_entry_by_rate(lloyd_cb, est, noise_var);
            value = guarded_ratio(spectral_efficiency(ch.matrix, lloyd_cb.entries[idx], noise_var),
                                  oracle[t]);
          } else if (name == "lloyd-omp") {
            const CMat est =
                reshape_channel(estimate_omp(dictionary, pc, y, config.omp_sparsity), g);
            const int idx = select_entry_by_rate(lloyd_cb, est, noise_var);
            value = guarded_ratio(spectral_efficiency(ch.matrix, lloyd_cb.entries[idx], noise_var),
                                  oracle[t]);
          } else if (name == "lloyd-gmm") {
            const CMat est = reshape_channel(gmm_est->estimate(y), g);
            const int idx = select_entry_by_rate(lloyd_cb, est, noise_var);
            value = guarded_ratio(spectral_efficiency(ch.matrix, lloyd_cb.entries[idx], noise_var),
                                  oracle[t]);
          } else if (name == "random-entry") {
            const int idx = select_entry_by_subspace(random_cb, ch.matrix);
            const CMat q = directional_cov(random_cb.directional[idx], rho);
            value = guarded_ratio(spectral_efficiency(ch.matrix, q, noise_var), oracle[t]);
          }
          records.push_back({t, name, snr_db, n_p, name == "oracle-wf" ? 0 : bits, value});
        }
      }
    }
  }
  return records;
}

std::vector<EvalRecord> eval_mu(const ExperimentConfig& config) {
  const std::vector<std::string> methods = resolve_methods(
      config.methods, {"gmm-wmmse", "gmm-swmmse", "lloyd-gmm-wmmse", "random-gmm-wmmse"});
  const ArrayGeometry g = config.scenario.geometry();
  const double rho = config.power_budget;
  const int users = config.mu.users;
  if (users < 1) throw std::invalid_argument("experiment config: users must be positive");
  if (users > config.scenario.eval_count)
    throw std::invalid_argument("experiment config: more users than evaluation channels");

  const Dataset train = generate_dataset(g, config.scenario.train_count, config.scenario.paths,
                                         config.scenario.spread_deg, config.scenario.train_seed);
  const Dataset eval = generate_dataset(g, config.scenario.eval_count, config.scenario.paths,
                                        config.scenario.spread_deg, config.scenario.eval_seed);
  const Gmm model = reduced_model(config, train);
  const int k = model.size();
  const int bits = bits_for(k);
  const WmmseOptions wopt{config.mu.wmmse_max_iter, 1e-6};

  Codebook random_cb;
  if (wants(methods, "random-gmm-wmmse"))
    random_cb = random_codebook(k, g, rho, config.random_seed);

  // Constellations are fixed across (snr, n_p) cells so comparisons pair up.
  std::vector<std::vector<int>> line_up(config.mu.constellations);
  for (int t = 0; t < config.mu.constellations; ++t) {
    Rng rng(derive_seed(config.mu.seed, t, 0x636f6e73ULL));
    std::vector<int>& idx = line_up[t];
    while (static_cast<int>(idx.size()) < users) {
      const int pick = static_cast<int>(rng.index(eval.count()));
      if (std::find(idx.begin(), idx.end(), pick) == idx.end()) idx.push_back(pick);
    }
  }

  std::vector<EvalRecord> records;
  for (std::size_t si = 0; si < config.snr_db.size(); ++si) {
    const double snr_db = config.snr_db[si];
    const double noise_var = rho * std::pow(10.0, -snr_db / 10.0);

    Codebook gmm_cb, lloyd_cb;
    if (wants(methods, "gmm-wmmse"))
      gmm_cb = build_codebook(model, train, noise_var, rho, config.pga);
    if (wants(methods, "lloyd-gmm-wmmse"))
      lloyd_cb = lloyd_codebook(train, k, noise_var, rho, config.lloyd_seed, config.pga,
                                config.lloyd_max_iter);

    for (std::size_t pi = 0; pi < config.n_p.size(); ++pi) {
      const int n_p = config.n_p[pi];
      const std::uint64_t cell = si * config.n_p.size() + pi;
      const PilotConfig pc = build_pilot_config(g, n_p, snr_db, rho);

      ObservationGmm obs;
      if (wants(methods, "gmm-wmmse") || wants(methods, "gmm-swmmse"))
        obs = adapt_to_observations(model, pc);
      std::unique_ptr<GmmEstimator> gmm_est;
      if (wants(methods, "lloyd-gmm-wmmse") || wants(methods, "random-gmm-wmmse"))
        gmm_est = std::make_unique<GmmEstimator>(model, pc);

      for (int t = 0; t < config.mu.constellations; ++t) {
        std::vector<CMat> true_channels(users);
        std::vector<CVec> observations(users);
        for (int j = 0; j < users; ++j) {
          const ChannelSample& ch = eval.samples[line_up[t][j]];
          true_channels[j] = ch.matrix;
          observations[j] = observe(ch, pc,
                                    derive_seed(config.trial_seed,
                                                static_cast<std::uint64_t>(t) * users + j, cell));
        }

        std::vector<int> fed_back(users, -1);
        if (wants(methods, "gmm-wmmse") || wants(methods, "gmm-swmmse"))
          for (int j = 0; j < users; ++j)
            fed_back[j] = select_from_observation(obs, observations[j]).index;

        for (const auto& name : methods) {
          double value = 0.0;
          if (name == "gmm-swmmse") {
            const PrecoderSet pre =
                swmmse(model, fed_back, noise_var, rho, config.mu.streams,
                       config.mu.swmmse_max_iter, derive_seed(config.mu.seed, t, 4096 + cell));
            value = sum_rate(true_channels, pre, noise_var);
          } else {
            std::vector<CMat> reps(users);
            for (int j = 0; j < users; ++j) {
              int idx = 0;
              const Codebook* cb = nullptr;
              if (name == "gmm-wmmse") {
                idx = fed_back[j];
                cb = &gmm_cb;
              } else {
                const CMat est = reshape_channel(gmm_est->estimate(observations[j]), g);
                cb = name == "lloyd-gmm-wmmse" ? &lloyd_cb : &random_cb;
                idx = select_entry_by_subspace(*cb, est);
              }
              reps[j] = cb->directional[idx].adjoint();
            }
            const WmmseResult res = wmmse(reps, noise_var, rho, config.mu.streams, wopt);
            value = sum_rate(true_channels, res.precoders, noise_var);
          }
          records.push_back({t, name, snr_db, n_p, bits, value});
        }
      }
    }
  }
  return records;
}

std::vector<std::pair<double, double>> ccdf(const std::vector<double>& values,
                                            const std::vector<double>& grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double threshold : grid) {
    std::size_t above = 0;
    for (double v : values)
      if (v > threshold) ++above;
    out.emplace_back(threshold,
                     values.empty() ? 0.0 : static_cast<double>(above) / values.size());
  }
  return out;
}

std::vector<double> default_ccdf_grid(const std::vector<double>& values, int points) {
  if (values.empty() || points < 1) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (points == 1 || hi <= lo) return {lo};
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  return grid;
}

std::string records_to_csv(const std::vector<EvalRecord>& records) {
  std::string out = "trial_id,method,snr_db,n_p,bits,value\n";
  char num[64];
  for (const auto& r : records) {
    out += std::to_string(r.trial_id);
    out += ',';
    out += r.method;
    out += ',';
    std::snprintf(num, sizeof(num), "%.17g", r.snr_db);
    out += num;
    out += ',';
    out += std::to_string(r.n_p);
    out += ',';
    out += std::to_string(r.bits);
    out += ',';
    std::snprintf(num, sizeof(num), "%.17g", r.value);
    out += num;
    out += '\n';
  }
  return out;
}

std::string summarize_records(const std::vector<EvalRecord>& records, int ccdf_points) {
  std::map<std::tuple<std::string, double, int, int>, std::vector<double>> groups;
  for (const auto& r : records)
    groups[{r.method, r.snr_db, r.n_p, r.bits}].push_back(r.value);

  ordered_json out;
  out["groups"] = ordered_json::array();
  for (const auto& [key, values] : groups) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    const std::vector<double> grid = default_ccdf_grid(values, ccdf_points);
    const auto curve = ccdf(values, grid);
    ordered_json cj;
    cj["grid"] = ordered_json::array();
    cj["prob"] = ordered_json::array();
    for (const auto& [threshold, prob] : curve) {
      cj["grid"].push_back(threshold);
      cj["prob"].push_back(prob);
    }
    out["groups"].push_back(ordered_json{{"method", std::get<0>(key)},
                                         {"snr_db", std::get<1>(key)},
                                         {"n_p", std::get<2>(key)},
                                         {"bits", std::get<3>(key)},
                                         {"count", values.size()},
                                         {"mean", mean},
                                         {"ccdf", cj}});
  }
  return out.dump(2) + "\n";
}

}  // namespace gmmfb
