#pragma once

namespace desate {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace desate
