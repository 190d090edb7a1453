#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace neura {

/// Bad configuration value; field() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// The simulated machine touched an address the compiler never laid out.
class SimulationFault : public std::runtime_error {
 public:
  SimulationFault(std::uint64_t addr, const std::string& what)
      : std::runtime_error(what), addr_(addr) {}
  std::uint64_t address() const { return addr_; }

 private:
  std::uint64_t addr_;
};

/// Lost, duplicated or miscounted work: a conservation law failed.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The progress watchdog saw no forward progress for its whole window.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace neura
