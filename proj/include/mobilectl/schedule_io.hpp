#pragma once

#include <string>

#include "json.hpp"
#include "mobilectl/control.hpp"
#include "mobilectl/grid.hpp"

namespace mobilectl {

inline constexpr const char* kScheduleSchema = "mobilectl.schedule/1";

/// Schedule document. Constant payloads are written verbatim; field payloads
/// are written as node x time sample tables. Closures are sampled at the grid
/// nodes and `time_samples + 1` equally spaced times per stage; tables are
/// written as stored, so they round-trip bit-exactly.
nlohmann::json schedule_to_json(const ControlSchedule& schedule, const SpatialGrid& grid, int time_samples = 32);

ControlSchedule schedule_from_json(const nlohmann::json& doc);

std::string dump_json(const nlohmann::json& doc);

}  // namespace mobilectl
