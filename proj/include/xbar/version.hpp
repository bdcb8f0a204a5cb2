#pragma once

namespace xbar {

inline const char *kVersion = "0.1.0";

} // namespace xbar
