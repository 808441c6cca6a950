#ifndef OFFDAE_ERRORS_HPP
#define OFFDAE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace offdae {

/// Malformed inputs: shape mismatches, invalid probabilities, bad flags.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exact policy evaluation failed (singular Bellman system).
struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A regression could not be set up from the given data.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Read of a nature-advantage entry outside the transition support.
struct SupportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a closed-form expression.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training aborted because the critic blew up.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace offdae

#endif  // OFFDAE_ERRORS_HPP
