#include "qode/schedule_io.hpp"

#include <fstream>

namespace qode {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json schedule_to_json(const ControlSchedule& sched) {
  ordered_json j;
  j["width"] = sched.width;
  j["input_dim"] = sched.input_dim;
  ordered_json segs = ordered_json::array();
  for (const auto& seg : sched.segments) {
    ordered_json s;
    s["duration"] = seg.duration;
    ordered_json lin = ordered_json::array();
    for (const auto& t : seg.linear) lin.push_back({t.row + 1, t.col + 1, t.value});
    ordered_json quad = ordered_json::array();
    for (const auto& t : seg.quadratic) quad.push_back({t.row + 1, t.j + 1, t.k + 1, t.value});
    ordered_json con = ordered_json::array();
    for (const auto& t : seg.constant) con.push_back({t.row + 1, t.value});
    s["linear"] = std::move(lin);
    s["quadratic"] = std::move(quad);
    s["constant"] = std::move(con);
    segs.push_back(std::move(s));
  }
  j["segments"] = std::move(segs);
  ordered_json ro = ordered_json::array();
  for (const auto& r : sched.readout) ro.push_back({r.index + 1, r.value});
  j["readout"] = std::move(ro);
  return j;
}

namespace {

int as_index(const json& v, const char* what) {
  if (!v.is_number_integer()) throw InvalidSchedule(std::string(what) + ": index must be integer");
  return v.get<int>() - 1;
}

}  // namespace

ControlSchedule schedule_from_json(const json& j) {
  ControlSchedule sched;
  try {
    sched.width = j.at("width").get<int>();
    sched.input_dim = j.at("input_dim").get<int>();
    for (const auto& s : j.at("segments")) {
      ControlSegment seg;
      seg.duration = s.at("duration").get<double>();
      if (s.contains("linear")) {
        for (const auto& t : s["linear"]) {
          seg.linear.push_back({as_index(t.at(0), "linear"), as_index(t.at(1), "linear"),
                                t.at(2).get<double>()});
        }
      }
      if (s.contains("quadratic")) {
        for (const auto& t : s["quadratic"]) {
          seg.quadratic.push_back({as_index(t.at(0), "quadratic"), as_index(t.at(1), "quadratic"),
                                   as_index(t.at(2), "quadratic"), t.at(3).get<double>()});
        }
      }
      if (s.contains("constant")) {
        for (const auto& t : s["constant"]) {
          seg.constant.push_back({as_index(t.at(0), "constant"), t.at(1).get<double>()});
        }
      }
      sched.segments.push_back(std::move(seg));
    }
    for (const auto& r : j.at("readout")) {
      sched.readout.push_back({as_index(r.at(0), "readout"), r.at(1).get<double>()});
    }
  } catch (const json::exception& e) {
    throw InvalidSchedule(std::string("malformed schedule JSON: ") + e.what());
  }
  sched.validate();
  return sched;
}

void save_schedule(const std::string& path, const ControlSchedule& sched,
                   const ordered_json& meta) {
  ordered_json j = schedule_to_json(sched);
  if (!meta.empty()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
}

ScheduleFile load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidSchedule(std::string("cannot parse ") + path + ": " + e.what());
  }
  ScheduleFile f;
  f.schedule = schedule_from_json(j);
  f.meta = j.value("meta", json::object());
  return f;
}

}  // namespace qode
