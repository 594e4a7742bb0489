#pragma once

#include <filesystem>
#include <string>

#include "kia/models.hpp"

namespace kia {

inline constexpr int kCheckpointVersion = 1;

// JSON header (architecture, dims, variant, seed, depth, parameter shapes)
// followed by the parameters as little-endian f64 in declaration order and,
// when present, the normalizer (mean row, then scale).
std::string serialize_checkpoint(const KiaModel& model);
KiaModel deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const KiaModel& model, const std::filesystem::path& path);
KiaModel load_checkpoint(const std::filesystem::path& path);

}  // namespace kia
