#ifndef GRASSMANN_ERRORS_HPP
#define GRASSMANN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace grassmann {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  RankDeficient,
  CutLocus,
  NotPSD,
  Singular,
  KernelMismatch,
  AllZeroCode,
  NotConverged,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::CutLocus: return "CutLocus";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::KernelMismatch: return "KernelMismatch";
    case ErrorCode::AllZeroCode: return "AllZeroCode";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` says what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Validation problems (bad input shapes, arguments, files) as opposed to
  /// numerical breakdowns inside a computation.
  bool is_validation() const noexcept {
    return code_ == ErrorCode::InvalidArgument || code_ == ErrorCode::DimensionMismatch ||
           code_ == ErrorCode::KernelMismatch || code_ == ErrorCode::Io;
  }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace detail
}  // namespace grassmann

#endif  // GRASSMANN_ERRORS_HPP
