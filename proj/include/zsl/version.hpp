#pragma once

namespace zsl {

inline constexpr const char* kVersion = "0.1.0";

}
