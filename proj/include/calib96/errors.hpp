#pragma once

#include <stdexcept>
#include <string>

namespace calib96 {

// Bad user input: malformed config files, inconsistent dimensions, invalid
// parameter values. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: Cholesky breakdown after the jitter ladder, degenerate
// sampler targets, design saturation. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

class IllConditionedError : public NumericalError {
 public:
  explicit IllConditionedError(const std::string& msg) : NumericalError(msg) {}
};

// The chaotic system left the representable range. Carries the model time at
// which the first non-finite state entry appeared.
class BlowupError : public NumericalError {
 public:
  BlowupError(const std::string& msg, double time)
      : NumericalError(msg), blowup_time(time) {}
  double blowup_time;
};

class InsufficientDataError : public NumericalError {
 public:
  explicit InsufficientDataError(const std::string& msg) : NumericalError(msg) {}
};

class DegenerateTargetError : public NumericalError {
 public:
  explicit DegenerateTargetError(const std::string& msg) : NumericalError(msg) {}
};

class DesignSaturationError : public NumericalError {
 public:
  explicit DesignSaturationError(const std::string& msg) : NumericalError(msg) {}
};

class EmptyNroyError : public NumericalError {
 public:
  explicit EmptyNroyError(const std::string& msg) : NumericalError(msg) {}
};

class InsufficientNroyError : public NumericalError {
 public:
  explicit InsufficientNroyError(const std::string& msg) : NumericalError(msg) {}
};

class UnreliableEstimateError : public NumericalError {
 public:
  explicit UnreliableEstimateError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace calib96
