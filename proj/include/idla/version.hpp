#pragma once

namespace idla {

inline constexpr const char* kVersion = "idla-lab 0.1.0";

} // namespace idla
