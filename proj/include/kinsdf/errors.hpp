#pragma once

#include <stdexcept>
#include <string>

namespace kinsdf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text document (robot, problem or system description).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class NonUnitAxisError : public Error {
 public:
  using Error::Error;
};

class InvalidLimitsError : public Error {
 public:
  using Error::Error;
};

class UnsupportedJointError : public Error {
 public:
  using Error::Error;
};

/// Triangle mesh that is not closed or not consistently oriented.
class OpenMeshError : public Error {
 public:
  using Error::Error;
};

class InvalidGeometryError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Sampling could not satisfy its acceptance test within the retry budget.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Robot hash or architecture of a dataset/checkpoint does not match.
class MismatchError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace kinsdf
