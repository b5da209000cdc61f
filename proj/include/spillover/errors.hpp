#pragma once

#include <stdexcept>
#include <string>

namespace spillover {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidEdge : public Error {
public:
    using Error::Error;
};

class ClusterTooSmall : public Error {
public:
    using Error::Error;
};

class BadParam : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// The realized assignment has zero probability under beta; importance
/// weighting is undefined (overlap/positivity violation).
class ZeroRealizedProbability : public Error {
public:
    using Error::Error;
};

class EmptyEstimand : public Error {
public:
    using Error::Error;
};

class EmptyConditional : public Error {
public:
    using Error::Error;
};

class MissingDecomposition : public Error {
public:
    using Error::Error;
};

class MissingCovariate : public Error {
public:
    using Error::Error;
};

class SingularDesign : public Error {
public:
    using Error::Error;
};

class DegenerateArm : public Error {
public:
    using Error::Error;
};

class ClusterTooLargeForOracle : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

}  // namespace spillover
