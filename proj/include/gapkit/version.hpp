#pragma once

namespace gapkit {

inline constexpr const char* kToolName = "gapkit";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace gapkit
