#pragma once

#include <stdexcept>

namespace biasci {

// Argument outside a function's mathematical domain (CLI exit code 2).
class domain_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The MSE assumption s2 <= s1 is violated (CLI exit code 3).
class assumption_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Internal numerical failure, e.g. a root bracket without a sign change
// (CLI exit code 4).
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace biasci
