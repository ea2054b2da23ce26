#pragma once

// RSDS dataset file: container with magic "RSDS". The JSON header echoes the
// workflow spec and seed and indexes every surgery (record plus payload
// offsets). Each surgery block holds its f32 feature rows followed by f32
// label rows (progress, rsd_min, elapsed_min, phase_id per frame).

#include <filesystem>
#include <string>

#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::synthsurg {

inline constexpr std::uint16_t kDatasetVersion = 1;

std::string serialize_dataset(const Dataset& dataset, const nlohmann::json& extra = nlohmann::json::object());
void write_dataset(const std::filesystem::path& path, const Dataset& dataset,
                   const nlohmann::json& extra = nlohmann::json::object());
/// Labels are re-derived from each record in double precision; the stored f32
/// labels are checked against them.
Dataset read_dataset(const std::filesystem::path& path);

/// One row per frame: surgery_id, t, phase_id, progress, elapsed_min, rsd_min, f0..fD-1.
void export_csv(const std::filesystem::path& path, const Dataset& dataset);
void export_jsonl(const std::filesystem::path& path, const Dataset& dataset);

nlohmann::json record_to_json(const SurgeryRecord& r);
SurgeryRecord record_from_json(const nlohmann::json& j);

}  // namespace rsdkit::synthsurg
