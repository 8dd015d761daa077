#pragma once

#include <string>

#include <json.hpp>

#include "qode/schedule.hpp"

namespace qode {

/// On-disk form: the normative schedule plus a free-form "meta" block
/// (layout, compiler parameters) that loaders may ignore.
struct ScheduleFile {
  ControlSchedule schedule;
  nlohmann::ordered_json meta;  // empty object when absent
};

/// 1-based indices, IEEE doubles; see README for the field layout.
nlohmann::ordered_json schedule_to_json(const ControlSchedule& sched);
ControlSchedule schedule_from_json(const nlohmann::json& j);

void save_schedule(const std::string& path, const ControlSchedule& sched,
                   const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
ScheduleFile load_schedule(const std::string& path);

}  // namespace qode
