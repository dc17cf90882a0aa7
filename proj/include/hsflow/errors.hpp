#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Some linear combination of the triple is degenerate at a point.
class NotHypersymplectic : public Error {
 public:
  NotHypersymplectic(const std::string& what, std::size_t index, double margin)
      : Error(what), index_(index), margin_(margin) {}
  explicit NotHypersymplectic(const std::string& what)
      : NotHypersymplectic(what, npos, 0.0) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Flat grid index of the offending point, or npos for pointwise calls.
  std::size_t index() const { return index_; }
  double margin() const { return margin_; }

 private:
  std::size_t index_;
  double margin_;
};

class SingularBase : public Error {
 public:
  using Error::Error;
};

class DegenerateMetric : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

/// The hypersymplectic margin collapsed during a step.
class StabilityLoss : public Error {
 public:
  StabilityLoss(const std::string& what, double time, double margin)
      : Error(what), time_(time), margin_(margin) {}
  double time() const { return time_; }
  double margin() const { return margin_; }

 private:
  double time_;
  double margin_;
};

class NonIntegrableAlpha : public Error {
 public:
  using Error::Error;
};

class DomainCollapse : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class OutOfOrder : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsflow
