#pragma once

namespace fairpfn {

inline constexpr const char* kVersion = "0.1.0";

}
