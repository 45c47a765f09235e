#pragma once

#include <stdexcept>
#include <string>

namespace aggterm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid configurations, unknown names.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& message, int line, int column)
      : ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                    message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class NeighborhoodTooLarge : public Error {
 public:
  NeighborhoodTooLarge(int size, int cap)
      : Error("neighborhood too large: " + std::to_string(size) + " nodes exceeds cap of " +
              std::to_string(cap) + " (lower the radius or raise the cap)"),
        size_(size),
        cap_(cap) {}

  int size() const { return size_; }
  int cap() const { return cap_; }

 private:
  int size_;
  int cap_;
};

}  // namespace aggterm
