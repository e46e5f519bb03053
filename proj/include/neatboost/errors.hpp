#pragma once

#include <stdexcept>
#include <string>

namespace neatboost {

/// Input data is malformed, inconsistent, or insufficient for the request.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model training diverged (non-finite loss or parameters).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace neatboost
