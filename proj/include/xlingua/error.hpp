#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xlingua {

/// Coarse failure classes. The CLI prints the category name as the first
/// token of its one-line error message and maps it to an exit status.
enum class ErrorCategory {
  usage,
  config,
  io,
  data,
  precondition,
  numeric,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::precondition: return "precondition";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

}  // namespace xlingua
