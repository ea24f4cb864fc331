#include "topo/linalg.hpp"

namespace topo {

const Array& param(const ParamMap& params, const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) {
    throw Error("missing parameter array: " + name);
  }
  return it->second;
}

ConstMatView mat_view(const Array& a) {
  if (a.shape.size() != 2) {
    throw Error("expected a rank-2 array, got shape " + shape_to_string(a.shape));
  }
  return ConstMatView(a.data.data(), static_cast<Eigen::Index>(a.shape[0]),
                      static_cast<Eigen::Index>(a.shape[1]));
}

MatView mat_view(Array& a) {
  if (a.shape.size() != 2) {
    throw Error("expected a rank-2 array, got shape " + shape_to_string(a.shape));
  }
  return MatView(a.data.data(), static_cast<Eigen::Index>(a.shape[0]),
                 static_cast<Eigen::Index>(a.shape[1]));
}

ConstVecView vec_view(const Array& a) {
  if (a.shape.size() != 1) {
    throw Error("expected a rank-1 array, got shape " + shape_to_string(a.shape));
  }
  return ConstVecView(a.data.data(), static_cast<Eigen::Index>(a.shape[0]));
}

VecView vec_view(Array& a) {
  if (a.shape.size() != 1) {
    throw Error("expected a rank-1 array, got shape " + shape_to_string(a.shape));
  }
  return VecView(a.data.data(), static_cast<Eigen::Index>(a.shape[0]));
}

Array& grad_slot(ParamMap& grads, const std::string& name,
                 const std::vector<std::size_t>& shape) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    it = grads.emplace(name, Array(shape)).first;
  } else if (it->second.shape != shape) {
    throw Error("gradient shape mismatch for " + name + ": " +
                shape_to_string(it->second.shape) + " vs " + shape_to_string(shape));
  }
  return it->second;
}

}  // namespace topo
