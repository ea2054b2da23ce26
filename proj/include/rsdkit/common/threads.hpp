#pragma once

namespace rsdkit {

// Resolves the worker count: explicit value if > 0, else RSDKIT_THREADS, else
// the OpenMP default. Applies it to the OpenMP runtime and returns it.
int configure_threads(int requested = 0);
int max_threads();

}  // namespace rsdkit
