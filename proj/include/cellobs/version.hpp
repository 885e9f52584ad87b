#pragma once

namespace cellobs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cellobs
