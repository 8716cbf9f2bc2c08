#pragma once

#include <stdexcept>
#include <string>

namespace hes {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct AsymmetricInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonScalarObjective : std::logic_error {
    using std::logic_error::logic_error;
};

struct UnregisteredPrimitive : std::logic_error {
    using std::logic_error::logic_error;
};

struct DegenerateData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfExtent : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hes
