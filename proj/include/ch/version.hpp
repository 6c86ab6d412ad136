#pragma once

namespace ch {

inline constexpr const char* kToolName = "cirrhosis-horizon";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace ch
