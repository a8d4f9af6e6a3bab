#pragma once

#include <stdexcept>
#include <string>

namespace spatrpm {

// Base for all library failures. `is_usage` separates bad input (parse,
// validation, configuration) from runtime failures so the CLI can pick an
// exit code without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, bool is_usage = false)
      : std::runtime_error(what), usage_(is_usage) {}

  bool is_usage() const { return usage_; }

 private:
  bool usage_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what, true) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, false) {}
};

}  // namespace spatrpm
