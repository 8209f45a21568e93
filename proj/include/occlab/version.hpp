#pragma once

#define OCCLAB_VERSION "1.0.0"

namespace occlab {

inline constexpr const char* version() { return OCCLAB_VERSION; }

}  // namespace occlab
