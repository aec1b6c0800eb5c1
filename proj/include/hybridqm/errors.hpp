#pragma once

#include <stdexcept>
#include <string>

namespace hybridqm {

// Invalid user-facing input: parameters, config fields, file contents.
// The CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Array-length / representation mismatches between objects that must agree.
class shape_error : public std::runtime_error {
public:
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime (norm blow-up, invalid expansion regime).
// The CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hybridqm
