#include "splat_common.hpp"

namespace qck::kernels::reference {

void splat_gaussians(std::span<const GaussianKernel> kernels, KernelScale scale, Raster<double>& out) {
    for (const auto& k : kernels) detail::splat_one(k, scale, out);
}

}  // namespace qck::kernels::reference
