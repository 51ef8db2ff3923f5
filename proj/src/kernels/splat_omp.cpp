#include <omp.h>

#include "qck/parallel.hpp"
#include "splat_common.hpp"

namespace qck::kernels {

void splat_gaussians(std::span<const GaussianKernel> kernels, KernelScale scale, Raster<double>& out) {
    const int nt = std::min<int>(threads(), static_cast<int>(kernels.size()));
    if (nt <= 1) {
        for (const auto& k : kernels) detail::splat_one(k, scale, out);
        return;
    }
    std::vector<Raster<double>> partial(static_cast<std::size_t>(nt), Raster<double>(out.width, out.height, 0.0));
    const auto n = static_cast<std::ptrdiff_t>(kernels.size());
#pragma omp parallel num_threads(nt)
    {
        auto& mine = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) detail::splat_one(kernels[static_cast<std::size_t>(i)], scale, mine);
    }
    const auto npix = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for num_threads(nt) schedule(static)
    for (std::ptrdiff_t p = 0; p < npix; ++p) {
        double acc = out.values[static_cast<std::size_t>(p)];
        for (const auto& buf : partial) acc += buf.values[static_cast<std::size_t>(p)];
        out.values[static_cast<std::size_t>(p)] = acc;
    }
}

}  // namespace qck::kernels
