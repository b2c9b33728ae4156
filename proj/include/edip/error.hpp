#pragma once

#include <stdexcept>
#include <string>

namespace edip {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace edip
