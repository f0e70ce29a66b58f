#pragma once

#include <stdexcept>
#include <string>

namespace sfdlm {

/// Bad configuration, unreadable input, or malformed file. CLI exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or values during compute. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sfdlm
