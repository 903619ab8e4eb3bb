#ifndef OLIA_ERROR_HPP
#define OLIA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace olia {

enum class ErrorCode {
  InvalidArgument,
  OutOfRange,
  Parse,
  State,
  Io,
  Convergence,
};

/// Base exception for the library. The C API maps `code()` onto olia_status.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace olia

#endif // OLIA_ERROR_HPP
