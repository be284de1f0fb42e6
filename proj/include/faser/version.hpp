#pragma once

namespace faser {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace faser
