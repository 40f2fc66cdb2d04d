#pragma once

#include <string>

namespace cted {

/// Shortest round-trip decimal representation, capped at 9 significant
/// digits. Every file writer funnels numbers through this so identical
/// inputs produce byte-identical outputs.
std::string format_number(double x);

/// Round to the double nearest the 9-significant-digit decimal of x.
/// Applied before handing values to the JSON writer so its own shortest
/// round-trip printing reproduces format_number's digits.
double round9(double x);

} // namespace cted
