#pragma once

namespace sfda {

inline constexpr const char* kVersion = "1.0.0";

}
