#pragma once

#include <stdexcept>
#include <string>

namespace auxtrial {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid inputs to a constructor or operation.
struct InvalidArgument : Error {
  using Error::Error;
};

struct BadStage : Error {
  using Error::Error;
};

struct EmptyPool : Error {
  using Error::Error;
};

// Internal assertion: solve_joint failed to bracket a root for valid inputs.
struct NoValidRoot : Error {
  using Error::Error;
};

struct DegenerateCovariance : Error {
  using Error::Error;
};

struct BoundsEmpty : Error {
  using Error::Error;
};

// Configuration error carrying the offending field path.
struct ConfigError : Error {
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace auxtrial
