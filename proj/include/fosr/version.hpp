#pragma once

namespace fosr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fosr
