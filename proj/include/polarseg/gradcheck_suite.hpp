#pragma once

#include <map>
#include <string>

namespace polarseg {

// Finite-difference sweep over every differentiable op plus the reduced-size
// end-to-end network, in double precision. Returns the max relative error per
// entry; "end_to_end" is the full-network check.
std::map<std::string, double> gradcheck_suite(int seeds);

inline constexpr double kPerOpGradTol = 1e-5;
inline constexpr double kEndToEndGradTol = 1e-4;

}  // namespace polarseg
