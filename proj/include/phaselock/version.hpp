#pragma once

namespace phaselock {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1";

}  // namespace phaselock
