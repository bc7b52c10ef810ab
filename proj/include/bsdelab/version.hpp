#pragma once

namespace bsdelab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bsdelab
