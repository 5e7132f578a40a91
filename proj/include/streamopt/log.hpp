#pragma once

namespace streamopt {

// Sets the spdlog level from STREAMOPT_LOG (trace, debug, info, warn, error,
// off); warn when unset.
void init_logging();

}  // namespace streamopt
