#pragma once

#include <stdexcept>
#include <string>

namespace pgee {

// Bad shapes, invalid configuration, malformed input files.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Singular systems and other failures of the numerics themselves.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pgee
