#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hqm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// A parameter set or configuration value violates its bounds.
class ParameterError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parameter"; }
};

/// Shapes disagree (state length vs. traverse ticks, series lengths).
class StructuralError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "structure"; }
};

/// An argument lies outside the domain of a function (t = 0, empty input).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

/// No residual bottleneck capacity is left for platoons.
class InfeasibleError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "infeasible"; }
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  std::size_t line_;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

}  // namespace hqm
