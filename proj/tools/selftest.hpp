#pragma once

#include <cstdint>
#include <iosfwd>

namespace cscpr::cli {

/// Quick property checks against brute-force oracles on built-in synthetic
/// data. Prints one line per check; true when all pass.
bool run_selftest(std::uint64_t seed, std::ostream& out);

}  // namespace cscpr::cli
