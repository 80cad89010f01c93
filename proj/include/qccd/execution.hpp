#pragma once

namespace qccd {

// Execution policy for data-parallel kernels: Serial is the reference
// implementation, Parallel runs the same per-element code under OpenMP.
// Results are identical by construction; tests assert it.
enum class Execution { Serial, Parallel };

}  // namespace qccd
