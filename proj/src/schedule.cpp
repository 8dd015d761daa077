#include "qode/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace qode {

void ControlSegment::add_linear(int row, int col, double value) {
  if (value != 0.0) linear.push_back({row, col, value});
}

void ControlSegment::add_quadratic(int row, int j, int k, double value) {
  if (value != 0.0) quadratic.push_back({row, j, k, value});
}

void ControlSegment::add_constant(int row, double value) {
  if (value != 0.0) constant.push_back({row, value});
}

double ControlSchedule::total_duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

namespace {

void check_index(int i, int width, const std::string& what, int seg) {
  if (i < 0 || i >= width) {
    throw InvalidSchedule("segment " + std::to_string(seg + 1) + ": " + what +
                          " index " + std::to_string(i + 1) + " out of range [1, " +
                          std::to_string(width) + "]");
  }
}

}  // namespace

void ControlSchedule::validate() const {
  if (width < 1) throw InvalidSchedule("width must be >= 1");
  if (input_dim < 1 || input_dim > width) {
    throw InvalidSchedule("input_dim must be in [1, width]");
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
      throw InvalidSchedule("segment " + std::to_string(s + 1) +
                            ": duration must be positive and finite");
    }
    std::set<std::pair<int, int>> lin_keys;
    for (const auto& t : seg.linear) {
      check_index(t.row, width, "linear row", static_cast<int>(s));
      check_index(t.col, width, "linear col", static_cast<int>(s));
      if (!lin_keys.insert({t.row, t.col}).second) {
        throw InvalidSchedule("segment " + std::to_string(s + 1) +
                              ": duplicate linear coefficient (" +
                              std::to_string(t.row + 1) + "," + std::to_string(t.col + 1) + ")");
      }
    }
    std::set<std::tuple<int, int, int>> quad_keys;
    for (const auto& t : seg.quadratic) {
      check_index(t.row, width, "quadratic row", static_cast<int>(s));
      check_index(t.j, width, "quadratic j", static_cast<int>(s));
      check_index(t.k, width, "quadratic k", static_cast<int>(s));
      if (!quad_keys.insert({t.row, t.j, t.k}).second) {
        throw InvalidSchedule("segment " + std::to_string(s + 1) +
                              ": duplicate quadratic coefficient (" +
                              std::to_string(t.row + 1) + "," + std::to_string(t.j + 1) + "," +
                              std::to_string(t.k + 1) + ")");
      }
    }
    std::set<int> const_keys;
    for (const auto& t : seg.constant) {
      check_index(t.row, width, "constant row", static_cast<int>(s));
      if (!const_keys.insert(t.row).second) {
        throw InvalidSchedule("segment " + std::to_string(s + 1) +
                              ": duplicate constant coefficient (" + std::to_string(t.row + 1) +
                              ")");
      }
    }
  }
  for (const auto& r : readout) {
    if (r.index < 0 || r.index >= width) {
      throw InvalidSchedule("readout index " + std::to_string(r.index + 1) +
                            " out of range [1, " + std::to_string(width) + "]");
    }
  }
}

}  // namespace qode
