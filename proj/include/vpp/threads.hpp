#pragma once

namespace vpp {

// Applies the VPP_THREADS cap (0 or unset = OpenMP default). Returns the
// thread count in effect.
int configure_threads_from_env();

int max_threads();

}  // namespace vpp
