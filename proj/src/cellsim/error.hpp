/**
 * cellsim
 *
 * Error taxonomy. The C API maps these codes one-to-one onto its status
 * enum; internally they travel as exceptions.
 */

#ifndef CELLSIM_ERROR_HPP_
#define CELLSIM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cellsim {

enum class ErrorCode {
  io = 1,
  parse = 2,
  validation = 3,
  config = 4,
  too_short = 5,
  unmatchable = 6,
  format = 7,
  invalid_argument = 8,
  internal = 9,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

}  // namespace cellsim

#endif  // CELLSIM_ERROR_HPP_
