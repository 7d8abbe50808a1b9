#include "gmmfb/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace gmmfb {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for reading");
  return f;
}

void write_json_line(std::ofstream& f, const ordered_json& j) {
  const std::string line = j.dump();
  f.write(line.data(), static_cast<std::streamsize>(line.size()));
  f.put('\n');
}

ordered_json read_json_line(std::ifstream& f, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(f, line)) fail(path, "missing header line");
  try {
    return ordered_json::parse(line);
  } catch (const std::exception& e) {
    fail(path, std::string("malformed header: ") + e.what());
  }
}

void expect_kind(const ordered_json& h, const char* kind, const std::filesystem::path& path) {
  if (!h.contains("version") || h.at("version").get<int>() != 1)
    fail(path, "unsupported format version");
  if (!h.contains("kind") || h.at("kind").get<std::string>() != kind)
    fail(path, std::string("expected a '") + kind + "' file");
}

void expect_eof(std::ifstream& f, const std::filesystem::path& path) {
  f.peek();
  if (!f.eof()) fail(path, "trailing bytes after payload");
}

void write_complex(std::ofstream& f, const CMat& m) {
  f.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(sizeof(cd) * static_cast<std::size_t>(m.size())));
}

CMat read_complex(std::ifstream& f, Eigen::Index rows, Eigen::Index cols,
                  const std::filesystem::path& path) {
  CMat m(rows, cols);
  f.read(reinterpret_cast<char*>(m.data()),
         static_cast<std::streamsize>(sizeof(cd) * static_cast<std::size_t>(m.size())));
  if (!f) fail(path, "truncated complex payload");
  return m;
}

void write_real(std::ofstream& f, const RVec& v) {
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}

RVec read_real(std::ifstream& f, Eigen::Index n, const std::filesystem::path& path) {
  RVec v(n);
  f.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
  if (!f) fail(path, "truncated real payload");
  return v;
}

ArrayGeometry geometry_from_header(const ordered_json& h, const std::filesystem::path& path) {
  ArrayGeometry g{h.at("tx_v").get<int>(), h.at("tx_h").get<int>(), h.at("n_rx").get<int>()};
  g.validate();
  if (h.contains("n_tx") && h.at("n_tx").get<int>() != g.tx_total())
    fail(path, "inconsistent transmit array dimensions");
  return g;
}

std::string hash_to_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  data.geometry.validate();
  const ordered_json h = {{"version", 1},
                          {"kind", "dataset"},
                          {"L", data.count()},
                          {"n_rx", data.geometry.rx_elements},
                          {"n_tx", data.geometry.tx_total()},
                          {"tx_v", data.geometry.tx_vertical},
                          {"tx_h", data.geometry.tx_horizontal},
                          {"scale", data.normalization_scale},
                          {"seed", data.seed}};
  auto f = open_out(path);
  write_json_line(f, h);
  for (const auto& s : data.samples) {
    if (s.matrix.rows() != data.geometry.rx_elements || s.matrix.cols() != data.geometry.tx_total())
      fail(path, "sample dimension mismatch");
    write_complex(f, s.matrix);
  }
  if (!f) fail(path, "write failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto f = open_in(path);
  const ordered_json h = read_json_line(f, path);
  expect_kind(h, "dataset", path);
  Dataset data;
  data.geometry = geometry_from_header(h, path);
  data.normalization_scale = h.at("scale").get<double>();
  data.seed = h.at("seed").get<std::uint64_t>();
  const int count = h.at("L").get<int>();
  if (count < 0) fail(path, "negative sample count");
  data.samples.reserve(count);
  for (int i = 0; i < count; ++i)
    data.samples.push_back({read_complex(f, data.geometry.rx_elements,
                                         data.geometry.tx_total(), path)});
  expect_eof(f, path);
  return data;
}

void save_model(const std::filesystem::path& path, const Gmm& model) {
  const CovarianceStructure& st = model.structure();
  const ArrayGeometry& g = model.geometry();
  const ordered_json h = {{"version", 1},
                          {"kind", "model"},
                          {"structure", to_string(st.kind)},
                          {"K", model.size()},
                          {"K_tx", st.tx_components},
                          {"K_rx", st.rx_components},
                          {"n_tx", g.tx_total()},
                          {"tx_v", g.tx_vertical},
                          {"tx_h", g.tx_horizontal},
                          {"n_rx", g.rx_elements},
                          {"em_iters", model.fit_info().em_iters},
                          {"final_loglik", model.fit_info().final_loglik}};
  auto f = open_out(path);
  write_json_line(f, h);
  write_real(f, model.weights());
  if (st.kind == CovarianceKind::full) {
    for (const auto& c : model.components()) write_complex(f, c.mean);
    for (const auto& c : model.components()) write_complex(f, c.cov);
  } else {
    if (!model.side_model()) fail(path, "structured model is missing its side parameters");
    const SideModel& side = *model.side_model();
    write_real(f, side.tx_weights);
    write_real(f, side.rx_weights);
    if (st.kind == CovarianceKind::kronecker) {
      for (const auto& c : side.tx_covs) write_complex(f, c);
      for (const auto& c : side.rx_covs) write_complex(f, c);
    } else {
      for (const auto& s : side.tx_spectra) write_real(f, s);
      for (const auto& s : side.rx_spectra) write_real(f, s);
    }
  }
  if (!f) fail(path, "write failed");
}

Gmm load_model(const std::filesystem::path& path) {
  auto f = open_in(path);
  const ordered_json h = read_json_line(f, path);
  expect_kind(h, "model", path);
  const CovarianceKind kind = covariance_kind_from_string(h.at("structure").get<std::string>());
  const ArrayGeometry g = geometry_from_header(h, path);
  const int k = h.at("K").get<int>();
  const int k_tx = h.at("K_tx").get<int>();
  const int k_rx = h.at("K_rx").get<int>();
  if (k < 1) fail(path, "component count must be positive");
  const Eigen::Index dim = g.channel_dim();
  const RVec weights = read_real(f, k, path);

  Gmm model;
  if (kind == CovarianceKind::full) {
    std::vector<Gaussian> comps(k);
    for (int i = 0; i < k; ++i) comps[i].mean = read_complex(f, dim, 1, path);
    for (int i = 0; i < k; ++i) comps[i].cov = read_complex(f, dim, dim, path);
    model = Gmm(weights, std::move(comps), {CovarianceKind::full, 0, 0}, g);
  } else {
    if (k_tx < 1 || k_rx < 1 || k != k_tx * k_rx) fail(path, "bad side component counts");
    SideModel side;
    side.tx_weights = read_real(f, k_tx, path);
    side.rx_weights = read_real(f, k_rx, path);
    if (kind == CovarianceKind::kronecker) {
      side.tx_covs.reserve(k_tx);
      side.rx_covs.reserve(k_rx);
      for (int i = 0; i < k_tx; ++i)
        side.tx_covs.push_back(read_complex(f, g.tx_total(), g.tx_total(), path));
      for (int i = 0; i < k_rx; ++i)
        side.rx_covs.push_back(read_complex(f, g.rx_elements, g.rx_elements, path));
    } else {
      const CMat d_tx = structured_transform_ura(kind, g.tx_vertical, g.tx_horizontal);
      const CMat d_rx = structured_transform_ula(kind, g.rx_elements);
      for (int i = 0; i < k_tx; ++i) {
        side.tx_spectra.push_back(read_real(f, d_tx.rows(), path));
        side.tx_covs.push_back(hermitize(d_tx.adjoint() * side.tx_spectra.back().asDiagonal() * d_tx));
      }
      for (int i = 0; i < k_rx; ++i) {
        side.rx_spectra.push_back(read_real(f, d_rx.rows(), path));
        side.rx_covs.push_back(hermitize(d_rx.adjoint() * side.rx_spectra.back().asDiagonal() * d_rx));
      }
    }
    std::vector<Gaussian> comps(k);
    for (int i = 0; i < k_tx; ++i)
      for (int j = 0; j < k_rx; ++j) {
        Gaussian& c = comps[i * k_rx + j];
        c.mean = CVec::Zero(dim);
        c.cov = kron(side.tx_covs[i], side.rx_covs[j]);
      }
    model = Gmm(weights, std::move(comps), {kind, k_tx, k_rx}, g);
    model.set_side_model(std::move(side));
  }
  FitInfo info;
  info.em_iters = h.at("em_iters").get<int>();
  info.final_loglik = h.at("final_loglik").get<double>();
  model.set_fit_info(std::move(info));
  expect_eof(f, path);
  return model;
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook,
                   std::uint64_t source_model_hash) {
  if (!codebook.entries.empty() &&
      codebook.entries.size() != codebook.directional.size())
    fail(path, "entry/directional count mismatch");
  const ordered_json h = {{"version", 1},
                          {"kind", "codebook"},
                          {"K", codebook.size()},
                          {"n_tx", codebook.n_tx},
                          {"n_rx", codebook.n_rx},
                          {"rho", codebook.power_budget},
                          {"has_entries", codebook.entries.empty() ? 0 : 1},
                          {"source_model_hash", hash_to_hex(source_model_hash)}};
  auto f = open_out(path);
  write_json_line(f, h);
  for (const auto& q : codebook.entries) {
    if (q.rows() != codebook.n_tx || q.cols() != codebook.n_tx)
      fail(path, "entry dimension mismatch");
    write_complex(f, q);
  }
  for (const auto& x : codebook.directional) {
    if (x.rows() != codebook.n_tx || x.cols() != codebook.n_rx)
      fail(path, "directional factor dimension mismatch");
    write_complex(f, x);
  }
  if (!f) fail(path, "write failed");
}

Codebook load_codebook(const std::filesystem::path& path, std::uint64_t* source_model_hash) {
  auto f = open_in(path);
  const ordered_json h = read_json_line(f, path);
  expect_kind(h, "codebook", path);
  Codebook cb;
  cb.n_tx = h.at("n_tx").get<int>();
  cb.n_rx = h.at("n_rx").get<int>();
  cb.power_budget = h.at("rho").get<double>();
  const int k = h.at("K").get<int>();
  const bool has_entries = h.at("has_entries").get<int>() != 0;
  if (k < 1 || cb.n_tx < 1 || cb.n_rx < 1) fail(path, "bad codebook dimensions");
  if (source_model_hash) {
    const std::string hex = h.at("source_model_hash").get<std::string>();
    *source_model_hash = std::stoull(hex, nullptr, 16);
  }
  if (has_entries)
    for (int i = 0; i < k; ++i) cb.entries.push_back(read_complex(f, cb.n_tx, cb.n_tx, path));
  for (int i = 0; i < k; ++i) cb.directional.push_back(read_complex(f, cb.n_tx, cb.n_rx, path));
  expect_eof(f, path);
  return cb;
}

void save_pilot_config(const std::filesystem::path& path, const PilotConfig& config) {
  config.geometry.validate();
  const ordered_json h = {{"version", 1},
                          {"kind", "pilot_config"},
                          {"n_p", config.n_p},
                          {"snr_db", config.snr_db},
                          {"rho", config.power_budget},
                          {"noise_var", config.noise_variance},
                          {"tx_v", config.geometry.tx_vertical},
                          {"tx_h", config.geometry.tx_horizontal},
                          {"n_rx", config.geometry.rx_elements}};
  auto f = open_out(path);
  write_json_line(f, h);
  write_complex(f, config.pilots);
  if (!f) fail(path, "write failed");
}

PilotConfig load_pilot_config(const std::filesystem::path& path) {
  auto f = open_in(path);
  const ordered_json h = read_json_line(f, path);
  expect_kind(h, "pilot_config", path);
  PilotConfig config;
  config.geometry = geometry_from_header(h, path);
  config.n_p = h.at("n_p").get<int>();
  config.snr_db = h.at("snr_db").get<double>();
  config.power_budget = h.at("rho").get<double>();
  config.noise_variance = h.at("noise_var").get<double>();
  if (config.n_p < 1 || config.n_p > config.geometry.tx_total())
    fail(path, "pilot count out of range");
  config.pilots = read_complex(f, config.geometry.tx_total(), config.n_p, path);
  config.observation_op =
      kron(config.pilots.transpose(),
           CMat::Identity(config.geometry.rx_elements, config.geometry.rx_elements));
  expect_eof(f, path);
  return config;
}

void save_vector_batch(const std::filesystem::path& path, const VectorBatch& batch) {
  if (batch.users < 1) fail(path, "users must be positive");
  const ordered_json h = {{"version", 1},
                          {"kind", "vectors"},
                          {"dim", batch.columns.rows()},
                          {"count", batch.columns.cols()},
                          {"users", batch.users}};
  auto f = open_out(path);
  write_json_line(f, h);
  write_complex(f, batch.columns);
  if (!f) fail(path, "write failed");
}

VectorBatch load_vector_batch(const std::filesystem::path& path) {
  auto f = open_in(path);
  const ordered_json h = read_json_line(f, path);
  expect_kind(h, "vectors", path);
  VectorBatch batch;
  batch.users = h.at("users").get<int>();
  const Eigen::Index dim = h.at("dim").get<Eigen::Index>();
  const Eigen::Index count = h.at("count").get<Eigen::Index>();
  if (batch.users < 1 || dim < 1 || count < 0) fail(path, "bad vector batch header");
  batch.columns = read_complex(f, dim, count, path);
  expect_eof(f, path);
  return batch;
}

void save_indices_csv(const std::filesystem::path& path, const std::vector<IndexRecord>& rows) {
  std::string text = "trial_id,user_id,k_star\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d\n", r.trial_id, r.user_id, r.k_star + 1);
    text += buf;
  }
  write_text_file(path, text);
}

std::vector<IndexRecord> load_indices_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || line != "trial_id,user_id,k_star")
    fail(path, "bad indices header");
  std::vector<IndexRecord> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    IndexRecord r;
    int k_disk = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%d", &r.trial_id, &r.user_id, &k_disk) != 3)
      fail(path, "bad indices row: " + line);
    if (k_disk < 1) fail(path, "k_star must be 1-based on disk");
    r.k_star = k_disk - 1;
    rows.push_back(r);
  }
  return rows;
}

void save_merge_trace(const std::filesystem::path& path, const MergeTrace& trace) {
  ordered_json steps = ordered_json::array();
  for (const auto& s : trace.steps)
    steps.push_back(ordered_json{{"a", s.index_a + 1}, {"b", s.index_b + 1},
                                 {"d", s.dissimilarity}});
  const ordered_json h = {{"version", 1},
                          {"kind", "merge_trace"},
                          {"initial_k", trace.initial_k},
                          {"final_k", trace.final_k},
                          {"steps", steps}};
  write_text_file(path, h.dump() + "\n");
}

void save_precoders(const std::filesystem::path& path, const PrecoderBatch& batch) {
  if (batch.trials.empty()) fail(path, "empty precoder batch");
  const std::size_t users = batch.trials[0].precoders.size();
  if (users == 0) fail(path, "precoder set without users");
  const Eigen::Index n_tx = batch.trials[0].precoders[0].rows();
  const Eigen::Index streams = batch.trials[0].precoders[0].cols();
  const double rho = batch.trials[0].power_budget;
  for (const auto& t : batch.trials) {
    if (t.precoders.size() != users || t.power_budget != rho)
      fail(path, "non-uniform precoder batch");
    for (const auto& m : t.precoders)
      if (m.rows() != n_tx || m.cols() != streams) fail(path, "precoder dimension mismatch");
  }
  const ordered_json h = {{"version", 1},
                          {"kind", "precoders"},
                          {"trials", batch.trials.size()},
                          {"users", users},
                          {"n_tx", n_tx},
                          {"streams", streams},
                          {"rho", rho}};
  auto f = open_out(path);
  write_json_line(f, h);
  for (const auto& t : batch.trials)
    for (const auto& m : t.precoders) write_complex(f, m);
  if (!f) fail(path, "write failed");
}

PrecoderBatch load_precoders(const std::filesystem::path& path) {
  auto f = open_in(path);
  const ordered_json h = read_json_line(f, path);
  expect_kind(h, "precoders", path);
  const int trials = h.at("trials").get<int>();
  const int users = h.at("users").get<int>();
  const Eigen::Index n_tx = h.at("n_tx").get<Eigen::Index>();
  const Eigen::Index streams = h.at("streams").get<Eigen::Index>();
  const double rho = h.at("rho").get<double>();
  if (trials < 1 || users < 1 || n_tx < 1 || streams < 1) fail(path, "bad precoder header");
  PrecoderBatch batch;
  batch.trials.resize(trials);
  for (auto& t : batch.trials) {
    t.power_budget = rho;
    t.precoders.reserve(users);
    for (int j = 0; j < users; ++j) t.precoders.push_back(read_complex(f, n_tx, streams, path));
  }
  expect_eof(f, path);
  return batch;
}

std::uint64_t file_fnv1a(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto f = open_out(path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(path, "write failed");
}

}  // namespace gmmfb
