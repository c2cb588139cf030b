#pragma once

#include <stdexcept>
#include <string>

namespace mglm {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// UsageError -> 1, ConfigError/DataError -> 2, NumericError -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mglm
