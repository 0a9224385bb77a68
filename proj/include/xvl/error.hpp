#pragma once

#include <stdexcept>
#include <string>

namespace xvl {

// Bad arguments, bad config, or malformed input files. The CLI maps these to
// exit code 2; everything else is a runtime failure (exit code 3).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public ValidationError {
public:
  FormatError(const std::string& what, std::size_t offset)
      : ValidationError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace xvl
