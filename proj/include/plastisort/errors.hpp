#pragma once

#include <stdexcept>
#include <string>

namespace plastisort {

// Unsupported or malformed file content (image decoders, weight files).
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied parameters: config values, CLI arguments, shape
// mismatches detected before any work starts.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// I/O failure talking to the filesystem.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace plastisort
