#pragma once

#include <stdexcept>
#include <string>

namespace pmflow {

// Input outside the domain where an operation is defined.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Bernoulli law produced a non-positive density (vacuum).
class VacuumError : public std::runtime_error {
public:
    explicit VacuumError(const std::string& what) : std::runtime_error(what) {}
};

// A root could not be bracketed or an iteration failed to converge.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

// A unit direction was requested from a (near) zero vector.
class SingularDirection : public std::runtime_error {
public:
    explicit SingularDirection(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent user or solver configuration.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace pmflow
