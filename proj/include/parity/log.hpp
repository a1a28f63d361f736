#pragma once

#include <string>

namespace parity::log {

// Verbosity comes from PARITY_FORECAST_LOG (trace, debug, info, warn, error,
// off). Defaults to warn.
void init_from_env();

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);

}  // namespace parity::log
