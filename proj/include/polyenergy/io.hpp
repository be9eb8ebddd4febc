#pragma once

#include <filesystem>

#include "polyenergy/energy.hpp"
#include "polyenergy/models.hpp"

namespace polyenergy {

struct SaveOptions {
  // Numeric payloads at most this large are inlined as base64; larger ones go
  // to a raw little-endian sidecar file "<name>.bin" next to the JSON.
  std::int64_t sidecar_threshold_bytes = 32ll << 20;
};

// Energy coefficient files: JSON header (kind, eta, dimensions, ordering tag)
// plus one payload per coefficient. Round-trips bitwise.
void save_energy(const EnergyPoly& energy, const std::filesystem::path& file,
                 const SaveOptions& opts = {});
EnergyPoly load_energy(const std::filesystem::path& file);

// Assembled heat-model files: configuration, mesh data, system matrices, the
// factored cubic tensor and the initial state. Round-trips bitwise.
void save_model(const AssembledModel& model, const std::filesystem::path& file,
                const SaveOptions& opts = {});
AssembledModel load_model(const std::filesystem::path& file);

}  // namespace polyenergy
