#pragma once

#include <stdexcept>
#include <string>

namespace tomokit {

// Base of all domain errors. kind() is the short type name the CLI prints.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& m) : Error("DimensionMismatch", m) {}
};

class NotHermitian : public Error {
public:
    explicit NotHermitian(const std::string& m) : Error("NotHermitian", m) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& m) : Error("InvalidArgument", m) {}
};

class SingularBlock : public Error {
public:
    SingularBlock(int index, const std::string& m)
        : Error("SingularBlock", "block A_" + std::to_string(index) + " is singular (" + m + ")"),
          index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class RankDeficient : public Error {
public:
    explicit RankDeficient(const std::string& m) : Error("RankDeficient", m) {}
};

class UnsupportedDim : public Error {
public:
    explicit UnsupportedDim(const std::string& m) : Error("UnsupportedDim", m) {}
};

class FiducialInvalid : public Error {
public:
    explicit FiducialInvalid(const std::string& m) : Error("FiducialInvalid", m) {}
};

class Infeasible : public Error {
public:
    explicit Infeasible(const std::string& m) : Error("Infeasible", m) {}
};

class DegenerateRecord : public Error {
public:
    explicit DegenerateRecord(const std::string& m) : Error("DegenerateRecord", m) {}
};

class InvalidPovm : public Error {
public:
    explicit InvalidPovm(const std::string& m) : Error("InvalidPovm", m) {}
};

class RootFindingFailed : public Error {
public:
    explicit RootFindingFailed(const std::string& m) : Error("RootFindingFailed", m) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& m) : Error("FormatError", m) {}
};

} // namespace tomokit
