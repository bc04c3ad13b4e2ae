#pragma once

namespace camsel {
inline constexpr const char* kVersion = "0.1.0";
}
