#pragma once

#include <stdexcept>
#include <string>

namespace plid {

class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// A required file is missing or unreadable.
class LoadError : public Error {
public:
	using Error::Error;
};

/// Loaded or constructed data violates a domain invariant.
class ValidationError : public Error {
public:
	using Error::Error;
};

class ShapeError : public Error {
public:
	using Error::Error;
};

/// Bad flags or configuration values. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
	using Error::Error;
};

/// A loss or gradient became non-finite.
class NumericError : public Error {
public:
	using Error::Error;
};

} // namespace plid
