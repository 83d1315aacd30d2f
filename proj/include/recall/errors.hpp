#pragma once

#include <stdexcept>
#include <string>

namespace recall {

/// Malformed or out-of-contract caller input.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Operation requested on an object whose state cannot serve it
/// (e.g. decoding against an empty codebook).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// Codebook has no room for another registration.
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite arithmetic is required.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / corpus ingestion failure.
class IOError : public std::runtime_error {
public:
    explicit IOError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace recall
