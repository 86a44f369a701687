#pragma once

#include <stdexcept>
#include <string>

namespace hiermatch {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class SizeError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

// Raised when a mask or element does not overlap the image enough to extract.
class CoverageError : public Error {
public:
  using Error::Error;
};

class VersionError : public Error {
public:
  using Error::Error;
};

class ChecksumError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace hiermatch
