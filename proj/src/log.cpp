#include "parity/log.hpp"
#include "parity/error.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace parity {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Referential: return "referential";
    case ErrorKind::Range: return "range";
    case ErrorKind::Gap: return "gap";
    case ErrorKind::EmptyInput: return "empty_input";
    case ErrorKind::Config: return "config";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::SampleSize: return "sample_size";
    case ErrorKind::SingularDesign: return "singular_design";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Kink: return "kink";
    case ErrorKind::MissingUnit: return "missing_unit";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "internal";
}

namespace log {
namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_st("parity");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

}  // namespace

void init_from_env() {
  const char* env = std::getenv("PARITY_FORECAST_LOG");
  if (env == nullptr) return;
  logger()->set_level(spdlog::level::from_str(env));
}

void debug(const std::string& msg) { logger()->debug(msg); }
void info(const std::string& msg) { logger()->info(msg); }
void warn(const std::string& msg) { logger()->warn(msg); }

}  // namespace log
}  // namespace parity
