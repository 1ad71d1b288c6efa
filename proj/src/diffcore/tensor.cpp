#include "nlekit/diffcore/tensor.hpp"

#include <cmath>

namespace nlekit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::input: return "input";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::state: return "state";
    case ErrorKind::persistence: return "persistence";
    case ErrorKind::range: return "range";
    case ErrorKind::dependency: return "dependency";
  }
  return "unknown";
}

namespace diffcore {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tensor<long double>;

}  // namespace diffcore
}  // namespace nlekit
