#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace topo {

/// Dense 64-bit float tensor in C (row-major) order. All model parameters,
/// gradients and optimizer state use this one container.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Array() = default;
  explicit Array(std::vector<std::size_t> s);

  std::size_t size() const { return data.size(); }
  bool same_shape(const Array& o) const { return shape == o.shape; }
};

/// Parameters addressed by dotted names, ordered so that iteration (and
/// therefore every optimizer sweep) is deterministic.
using ParamMap = std::map<std::string, Array>;

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// NPY v1.0, dtype '<f8', C order.
void save_npy(const std::filesystem::path& path, const Array& array);
Array load_npy(const std::filesystem::path& path);

}  // namespace topo
