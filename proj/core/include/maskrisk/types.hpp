#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace maskrisk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// 1 = entry kept, 0 = entry masked.
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace maskrisk
