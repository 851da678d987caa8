#pragma once

#include <cstdint>
#include <string>

namespace lnsm {

std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t h);
// %.17g
std::string fmt17(double v);

} // namespace lnsm
