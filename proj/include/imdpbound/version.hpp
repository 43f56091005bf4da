#pragma once

namespace imdpbound {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace imdpbound
