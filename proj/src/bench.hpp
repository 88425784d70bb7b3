#pragma once

#include <cstdint>
#include <string>

namespace rme {

struct BenchOptions {
  uint64_t seed = 1;
  int runs = 20;     // randomized schedules per sweep point
  int max_sps = 3;   // super-passages per process per schedule
};

// Produces a CSV (with header) for one of the measurement sweeps:
//   "wport"    - passage RMRs of the ported lock for D in {2,4,8}
//   "tree"     - passage RMRs of the tournament lock for N in {2,4,8,16}
//   "adaptive" - passage RMRs of the adaptive lock (B=4) vs contention K
//   "crash"    - super-passage RMRs vs crash count F
// Throws ConfigError on an unknown sweep name.
std::string run_bench(const std::string& which, const BenchOptions& opt);

}  // namespace rme
