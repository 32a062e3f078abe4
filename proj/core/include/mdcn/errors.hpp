#pragma once

#include <stdexcept>
#include <string>

namespace mdcn {

/// Dimension or shape violation; the message names the offending dimension.
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed textual input (graph files, configs, KITTI labels, ...).
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where the numeric contract requires finite ones.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mdcn
