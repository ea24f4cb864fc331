#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "topo/array.hpp"
#include "topo/common.hpp"

namespace topo {

/// All dense math runs on row-major doubles so Array's C-order buffer can be
/// mapped without copies.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<Mat>;
using ConstMatView = Eigen::Map<const Mat>;
using VecView = Eigen::Map<Eigen::VectorXd>;
using ConstVecView = Eigen::Map<const Eigen::VectorXd>;

/// params.at with an error message that names the missing array.
const Array& param(const ParamMap& params, const std::string& name);

ConstMatView mat_view(const Array& a);          // rank-2 arrays
ConstVecView vec_view(const Array& a);          // rank-1 arrays
MatView mat_view(Array& a);
VecView vec_view(Array& a);

/// Gradient accumulator slot, created zero-filled on first use.
Array& grad_slot(ParamMap& grads, const std::string& name,
                 const std::vector<std::size_t>& shape);

}  // namespace topo
