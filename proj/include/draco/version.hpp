#pragma once

namespace draco {

inline constexpr const char* kVersion = "v0.1.0";

}  // namespace draco
