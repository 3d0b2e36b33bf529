#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace actweave {

/// Run configuration. Defaults are the published full-scale settings; the
/// desk-scale values live in configs/desk.toml.
struct PipelineConfig {
  int d_img = 4096;
  int d_w2v = 500;
  int d_text = 1000;
  int d_alg = 500;

  double alpha_c = 1.0;
  double alpha_w = 0.01;
  int batch_size = 96;

  int c_nn = 4;
  double theta_init = 0.0;

  double lr_encoder = 0.001;
  double lr_align = 0.001;
  int max_seq_len = 6;

  std::uint64_t seed = 0;
  double visualness_threshold = 0.6;
  int min_concept_samples = 2;

  int stage1_steps = 1000;
  int finetune_steps = 200;

  /// Throws InputError when an invariant does not hold.
  void validate() const;

  /// Applies one `key=value` (or `key = value`) assignment.
  void set(const std::string& key, const std::string& value);

  /// Flat key -> value view, in a fixed key order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Reads a TOML-style file of `key = value` lines. `#` starts a comment,
/// `[section]` headers are ignored, string values may be quoted.
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies `KEY=VAL` overrides in order.
void apply_overrides(PipelineConfig& config, const std::vector<std::string>& overrides);

}  // namespace actweave
