#pragma once

#include <stdexcept>
#include <string>

namespace iit {

// Caller broke a documented precondition (wrong rule class, bad argument, ...).
struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The target violates a structural requirement (empty neighborhood,
// disconnected neighborhood graph, asymmetric adjacency).
struct structure_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A size cap or budget was exceeded.
struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A linear solve or factorization failed beyond the configured guards.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration document (CLI maps this to exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace iit
