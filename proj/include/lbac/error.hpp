#pragma once

#include <stdexcept>
#include <string>

namespace lbac {

/// Root of every exception the runtime raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, fixture, or client setup.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the effect/opaque registries (duplicate names, reserved tags).
class RegistryError : public Error {
 public:
  enum class Kind { DuplicateEffect, DuplicateOpaque, DuplicateBinding, Unforgeable };

  RegistryError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace lbac
