#include "isarah/parallel.hpp"

#include <cstdlib>

namespace isarah {

int default_workers() {
  if (const char* env = std::getenv("ISARAH_WORKERS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<int>(std::min<long>(value, 1024));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace isarah
