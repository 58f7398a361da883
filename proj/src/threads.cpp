#include "vpp/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace vpp {

int configure_threads_from_env() {
  if (const char* env = std::getenv("VPP_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // unparsable value: keep the default
    }
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace vpp
