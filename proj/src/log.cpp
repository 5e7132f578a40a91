#include "streamopt/log.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>

namespace streamopt {

void init_logging() {
  const char* level = std::getenv("STREAMOPT_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

}  // namespace streamopt
