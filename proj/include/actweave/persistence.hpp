#pragma once

#include <filesystem>

#include "actweave/act_tree.hpp"
#include "actweave/asa_model.hpp"

namespace actweave {

inline constexpr int kActFormatVersion = 1;
inline constexpr int kCheckpointVersion = 1;

/// {"version": 1, "root": {name, verb, object, images, children, concept?}}
void save_act(const ActTree& tree, const std::filesystem::path& path);
ActTree load_act(const std::filesystem::path& path);

struct Checkpoint {
  AsaModel model;
  AsaOptimizer optimizer;
};

/// Magic, version, JSON header of dimensions and shapes, then every
/// parameter and Adam moment as little-endian IEEE-754 doubles.
void save_checkpoint(const AsaModel& model, const AsaOptimizer& optimizer, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws InputError if the stored dimensions differ from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelDims& expected);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace actweave
