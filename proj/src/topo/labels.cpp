#include "topo/labels.hpp"

#include "topo/common.hpp"

namespace topo {

const std::array<std::string, 3>& unified_labels() {
  static const std::array<std::string, 3> labels = {"O", "B-LOC", "I-LOC"};
  return labels;
}

const std::string& label_name(int id) {
  if (id < 0 || id >= kNumLabels) {
    throw Error("label id out of range: " + std::to_string(id));
  }
  return unified_labels()[static_cast<std::size_t>(id)];
}

int label_id(std::string_view name) {
  const auto& labels = unified_labels();
  for (int i = 0; i < kNumLabels; ++i) {
    if (labels[static_cast<std::size_t>(i)] == name) {
      return i;
    }
  }
  return -1;
}

}  // namespace topo
