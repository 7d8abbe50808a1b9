#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gmmfb/codebook.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/precoding.hpp"
#include "gmmfb/reduction.hpp"
#include "gmmfb/types.hpp"

namespace gmmfb {

// All container files share one layout: a single-line UTF-8 JSON header
// terminated by '\n', followed by raw little-endian float64 payloads.
// Complex blocks are stored interleaved (re, im) in column-major matrix
// order; multi-object blocks are concatenated in index order.

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const Gmm& model);
Gmm load_model(const std::filesystem::path& path);

void save_codebook(const std::filesystem::path& path, const Codebook& codebook,
                   std::uint64_t source_model_hash);
Codebook load_codebook(const std::filesystem::path& path,
                       std::uint64_t* source_model_hash = nullptr);

void save_pilot_config(const std::filesystem::path& path, const PilotConfig& config);
PilotConfig load_pilot_config(const std::filesystem::path& path);

// Observations / channel estimates: columns of a complex matrix plus the
// per-trial user count (observation j belongs to trial j/users, user j%users).
struct VectorBatch {
  CMat columns;
  int users = 1;
};
void save_vector_batch(const std::filesystem::path& path, const VectorBatch& batch);
VectorBatch load_vector_batch(const std::filesystem::path& path);

// Feedback indices CSV: header trial_id,user_id,k_star with 1-based k_star.
struct IndexRecord {
  int trial_id = 0;
  int user_id = 0;
  int k_star = 0;  // 0-based in memory; written as k_star + 1
};
void save_indices_csv(const std::filesystem::path& path, const std::vector<IndexRecord>& rows);
std::vector<IndexRecord> load_indices_csv(const std::filesystem::path& path);

// Merge-reduction trace JSON (1-based component positions on disk).
void save_merge_trace(const std::filesystem::path& path, const MergeTrace& trace);

struct PrecoderBatch {
  std::vector<PrecoderSet> trials;
};
void save_precoders(const std::filesystem::path& path, const PrecoderBatch& batch);
PrecoderBatch load_precoders(const std::filesystem::path& path);

std::uint64_t file_fnv1a(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gmmfb
