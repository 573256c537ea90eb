#pragma once

#include <span>
#include <vector>

#include "tlforecast/errors.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Labels a prediction window by the run-length-compressed phase sequence.
/// Single phase -> G/Y/R; one transition -> GY/YR/RG; the exact two-transition
/// green-yellow-red sweep -> GYR; every other composition -> Other.
inline ScenarioLabel classify_scenario(std::span<const Phase> phases) {
  if (phases.empty()) throw DomainError("classify_scenario: empty phase window");

  std::vector<Phase> runs;
  for (Phase p : phases) {
    if (runs.empty() || runs.back() != p) runs.push_back(p);
  }

  using enum Phase;
  if (runs.size() == 1) {
    switch (runs[0]) {
      case kGreen: return ScenarioLabel::kG;
      case kYellow: return ScenarioLabel::kY;
      case kRed: return ScenarioLabel::kR;
    }
  }
  if (runs.size() == 2) {
    if (runs[0] == kGreen && runs[1] == kYellow) return ScenarioLabel::kGY;
    if (runs[0] == kYellow && runs[1] == kRed) return ScenarioLabel::kYR;
    if (runs[0] == kRed && runs[1] == kGreen) return ScenarioLabel::kRG;
  }
  if (runs.size() == 3 && runs[0] == kGreen && runs[1] == kYellow &&
      runs[2] == kRed) {
    return ScenarioLabel::kGYR;
  }
  return ScenarioLabel::kOther;
}

inline ScenarioLabel classify_scenario(const std::vector<Phase>& phases) {
  return classify_scenario(std::span<const Phase>(phases));
}

}  // namespace tlf
