#pragma once

#include "trailgrade/nn/kernels.hpp"

namespace trailgrade::nn::detail {

// Defined in kernels_avx2.cpp when the build targets x86-64.
const KernelTable& avx2_table() noexcept;

}  // namespace trailgrade::nn::detail
