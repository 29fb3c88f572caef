#pragma once

#include <stdexcept>
#include <string>

namespace permideal {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// The true value exists but lies outside the window; the caller must enlarge.
struct BoundaryEscape : Error {
  explicit BoundaryEscape(const std::string& what) : Error(what) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error(what) {}
};

struct InsufficientWindow : Error {
  explicit InsufficientWindow(const std::string& what) : Error(what) {}
};

}  // namespace permideal
