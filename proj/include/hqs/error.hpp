#pragma once

#include <stdexcept>
#include <string>

namespace hqs {

// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record in an input file could not be interpreted.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A required file or directory is absent or unreadable.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hqs
