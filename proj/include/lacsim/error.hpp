#pragma once

#include <stdexcept>
#include <string>

namespace lacsim {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lacsim
