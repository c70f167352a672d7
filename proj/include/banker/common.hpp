#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace banker {

using Vec = std::vector<double>;
using Round = std::int64_t;

// Error hierarchy. Every error raised by the library derives from Error so
// callers can catch one type; the subclasses name the broken contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point lies on or outside the boundary of a regularizer's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// An iterative solver exceeded its iteration budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Rounds were presented out of order.
class OrderError : public Error {
 public:
  using Error::Error;
};

// A ledger entry or pending round was in the wrong state for the request.
class StateError : public Error {
 public:
  using Error::Error;
};

// A spend source has no stored dual gradient.
class MissingDualError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Feedback for one round as seen by a policy: the round index and the
// observed scalar loss (l_{s,A_s} for bandits, <l_s, A_s> for linear).
struct FeedbackEvent {
  Round round = 0;
  double loss = 0.0;

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

// Writes a single warning line to stderr.
void log_warning(const std::string& message);

}  // namespace banker
