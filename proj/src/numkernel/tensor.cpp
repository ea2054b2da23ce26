#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace rsdkit::numkernel
