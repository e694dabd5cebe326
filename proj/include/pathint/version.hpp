#pragma once

#define PATHINT_VERSION "0.1.0"

namespace pathint {
inline const char* version() { return PATHINT_VERSION; }
}  // namespace pathint
