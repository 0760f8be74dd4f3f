#pragma once

#include <stdexcept>
#include <string>

namespace pricecast {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { usage, io, schema, parse, domain, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(ErrorKind::schema, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

/// Argument outside the mathematical domain of an operation (negative log input, days > window, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

/// Degenerate data: singular design matrix, constant vector, empty class.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::schema:
    case ErrorKind::parse: return 4;
    case ErrorKind::domain:
    case ErrorKind::numeric: return 5;
  }
  return 1;
}

/// Throws the subclass matching `kind` with the given message.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::usage: throw UsageError(what);
    case ErrorKind::io: throw IoError(what);
    case ErrorKind::schema: throw SchemaError(what);
    case ErrorKind::parse: throw ParseError(what);
    case ErrorKind::domain: throw DomainError(what);
    case ErrorKind::numeric: throw NumericError(what);
  }
  throw Error(kind, what);
}

}  // namespace pricecast
