#include "rsdkit/common/threads.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

#include "rsdkit/common/error.hpp"

namespace rsdkit {

int configure_threads(int requested) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("RSDKIT_THREADS"); env && *env) {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("RSDKIT_THREADS is not an integer: ") + env);
      }
      if (n <= 0) throw ConfigError("RSDKIT_THREADS must be positive");
    }
  }
  if (n > 0) omp_set_num_threads(n);
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace rsdkit
