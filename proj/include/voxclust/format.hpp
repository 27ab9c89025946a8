#pragma once

#include <string>

namespace voxclust {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Shortest decimal form that parses back to the same float.
std::string format_float(float v);

}  // namespace voxclust
