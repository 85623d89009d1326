#pragma once

namespace agebranch {
inline constexpr const char* kVersion = "0.1.0";
}
