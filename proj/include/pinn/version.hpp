#pragma once

namespace pinn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pinn
