#pragma once

#include <stdexcept>
#include <string>

namespace kpde {

/// Shape or domain violation in caller-supplied data.
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Requested derivative order or problem combination is not implemented.
class UnsupportedOperation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// A factorization or iteration broke down. `nugget` is the last diagonal
/// shift attempted, or zero when not applicable.
class NumericalFailure : public std::runtime_error {
  public:
    explicit NumericalFailure(const std::string& what, double nugget = 0.0)
        : std::runtime_error(what), nugget_(nugget) {}

    [[nodiscard]] double nugget() const noexcept { return nugget_; }

  private:
    double nugget_;
};

/// Sparse regression ended with no active terms.
class DegenerateModel : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace kpde
