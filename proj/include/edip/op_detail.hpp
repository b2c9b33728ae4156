#pragma once

#include <functional>
#include <vector>

#include "edip/tensor.hpp"

namespace edip::detail {

// Shared by primitive implementations (ops.cpp, the sparse projector op).
void finalize_op(const char* op, Tensor& result, std::vector<Tensor> inputs,
                 std::function<void(Node&)> backward);

}  // namespace edip::detail
