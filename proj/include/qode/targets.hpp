#pragma once

#include <string>
#include <vector>

#include "qode/sobolev.hpp"

namespace qode {

/// Builtin targets, each normalized so the order-2 Sobolev bound
/// max_{|a|<=2} sup |f^(a)| <= 1 holds by construction:
///   sin1d  : sin(pi x)   / (2 (1 + pi^2))          (d = 1)
///   cos1d  : cos(2 pi x) / (2 (1 + 4 pi^2))        (d = 1)
///   cos2d  : cos(pi x1) cos(pi x2) / (2 (1+pi^2))  (d = 2)
///   half1d : constant 1/2                          (d = 1, any order)
const SmoothTarget& builtin_target(const std::string& name);
std::vector<std::string> builtin_target_names();

}  // namespace qode
