#pragma once

#include <stdexcept>
#include <string>

namespace cellfit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations on user-supplied data.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Failure of the forward problem at some step. Carries where it happened so
// callers (simulate, the residual layer) can annotate or convert it.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, long step_index, double time)
      : Error(what), step_index_(step_index), time_(time) {}

  long step_index() const noexcept { return step_index_; }
  double time() const noexcept { return time_; }

 private:
  long step_index_;
  double time_;
};

class SolverDiverged : public SolverError {
 public:
  using SolverError::SolverError;
};

class GeometricBreakdown : public SolverError {
 public:
  using SolverError::SolverError;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, const std::string& message)
      : Error(path + ": " + message), path_(path), message_(message) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string path_;
  std::string message_;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

}  // namespace cellfit
