#pragma once

namespace aggload {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace aggload
