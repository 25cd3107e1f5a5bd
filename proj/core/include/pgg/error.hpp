#pragma once

#include <stdexcept>
#include <string>

namespace pgg {

// All library failures surface as this exception type. The message names the
// failing operation first, e.g. "matmul: shape mismatch [2,3] x [4,1]".
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pgg
