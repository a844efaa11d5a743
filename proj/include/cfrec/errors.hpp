#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cfrec {

// A record or argument failed validation. Carries the name of the offending
// field so callers can report exactly what was wrong.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Filesystem or serialization failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cfrec
