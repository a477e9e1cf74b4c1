#pragma once

// Arithmetic inner loops of the network. Every kernel has a scalar reference
// implementation; an AVX2+FMA variant is compiled on x86-64 and selected at
// runtime when the CPU supports it. Setting TRAILGRADE_KERNELS=scalar forces
// the reference path.
//
// All matrices are row-major with tight leading dimensions.

#include <cstddef>
#include <string_view>

namespace trailgrade::nn {

struct KernelTable {
    std::string_view name;

    // C(MxN) += A(MxK) * B(KxN)
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
    // C(KxN) += A(MxK)^T * B(MxN)
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
    double (*dot)(std::size_t n, const double* x, const double* y);
    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
    // p -= lr * (m * c1) / (sqrt(v * c2) + eps), with c1, c2 the bias corrections.
    void (*adam_update)(std::size_t n, double* param, const double* grad, double* m, double* v, double beta1,
                        double beta2, double lr, double c1, double c2, double eps);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels() noexcept;

// The table used by the layers; chosen once per process.
const KernelTable& active_kernels() noexcept;

}  // namespace trailgrade::nn
