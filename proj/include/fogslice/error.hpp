#pragma once

#include <stdexcept>
#include <string>

namespace fogslice {

/// Bad or unresolvable configuration (unknown profile, malformed file, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Training produced a non-finite loss or weight.
class TrainingFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fogslice
