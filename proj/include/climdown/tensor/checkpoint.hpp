#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "climdown/tensor/params.hpp"

namespace climdown::tensor {

// A checkpoint is a directory with `params.bin` (little-endian float64, parameters then
// buffers in registration order) and `manifest.json` (layout plus caller metadata).

void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& ps,
                     const nlohmann::json& meta);

/// Metadata only; use it to rebuild the model before load_checkpoint.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir);

/// Overwrites values in `ps`. The layout (names, shapes, order) must match exactly.
void load_checkpoint(const std::filesystem::path& dir, ParameterSet& ps);

}  // namespace climdown::tensor
