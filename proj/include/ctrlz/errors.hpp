#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctrlz {

// Bad argument values: empty sample sets, non-finite rewards, length mismatches.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Operation called on an object in the wrong state (e.g. judging an empty store).
struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

struct NotFound : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// A learner or environment broke its interaction contract.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised by the training harness when anything inside a cycle throws.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(std::size_t cycle, const std::string& what)
      : std::runtime_error("cycle " + std::to_string(cycle) + ": " + what), cycle_(cycle) {}

  std::size_t cycle() const noexcept { return cycle_; }

 private:
  std::size_t cycle_;
};

}  // namespace ctrlz
