#pragma once

#include <stdexcept>
#include <string>

namespace fedarena {

// Dimension mismatch between matrices, models or batches.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ParamVector length or layout does not match the model architecture.
class LayoutError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// NaN/Inf encountered in gradients or parameters.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed on-disk data (IDX files, checkpoints).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration. The message lists offending field paths.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace fedarena
