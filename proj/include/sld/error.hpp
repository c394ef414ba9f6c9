#pragma once

#include <stdexcept>
#include <string>

namespace sld {

// Bad user input: config fields, CLI arguments, malformed files, fingerprint
// mismatches. Maps to exit code 1 in the CLI.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Anything that goes wrong after inputs were accepted (NaN losses, broken
// checkpoints mid-read, I/O failures). Maps to exit code 2 in the CLI.
struct RuntimeFailure : std::runtime_error {
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sld
