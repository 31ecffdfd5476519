#pragma once

#include <stdexcept>

namespace auditlab {

// Common base so the C boundary can map exceptions to status codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

class UnknownId : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class NetError : public Error {
public:
  using Error::Error;
};

// Raised by a remote session when the server refuses a data query.
class BudgetExhausted : public Error {
public:
  using Error::Error;
};

class EstimatorError : public Error {
public:
  using Error::Error;
};

}  // namespace auditlab
