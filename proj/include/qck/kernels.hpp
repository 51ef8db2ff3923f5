#pragma once

// Hot loops of the library. Every kernel has an OpenMP implementation in
// qck::kernels and a plain serial implementation in qck::kernels::reference;
// tests check the two agree and bench/ compares their throughput.

#include <span>

#include "qck/raster.hpp"

namespace qck::kernels {

// One isotropic Gaussian to be accumulated into a grid. Pixel (px, py) is
// evaluated at (px + 0.5, py + 0.5). Contributions beyond `radius` of the
// centre are dropped.
struct GaussianKernel {
    double cx = 0.0;
    double cy = 0.0;
    double bandwidth = 1.0;
    double radius = 4.0;
};

enum class KernelScale {
    unit_mass,       // discrete in-grid sum rescaled to exactly 1
    literal_1d_norm  // 1 / (sqrt(2 pi) * bandwidth)
};

// out += sum of kernels. Parallel over kernels with per-thread accumulation
// buffers reduced in thread order.
void splat_gaussians(std::span<const GaussianKernel> kernels, KernelScale scale, Raster<double>& out);

// Same-padded 2-d convolution over a channel-major (C, H, W) tensor with an
// odd square kernel and stride 1.
struct ConvShape {
    int in_channels = 1;
    int out_channels = 1;
    int height = 1;
    int width = 1;
    int ksize = 3;

    [[nodiscard]] std::size_t in_size() const noexcept {
        return static_cast<std::size_t>(in_channels) * height * width;
    }
    [[nodiscard]] std::size_t out_size() const noexcept {
        return static_cast<std::size_t>(out_channels) * height * width;
    }
    [[nodiscard]] std::size_t weight_size() const noexcept {
        return static_cast<std::size_t>(out_channels) * in_channels * ksize * ksize;
    }
};

// out = conv(in, weights) + bias. weights are laid out (out, in, ky, kx).
void conv_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weights,
                  std::span<const double> bias, std::span<double> out);
// grad_in = conv_transpose(grad_out, weights). Overwrites grad_in.
void conv_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weights,
                         std::span<double> grad_in);
// grad_weights += correlation(in, grad_out); grad_bias += sum(grad_out).
void conv_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> grad_out,
                          std::span<double> grad_weights, std::span<double> grad_bias);

namespace reference {

void splat_gaussians(std::span<const GaussianKernel> kernels, KernelScale scale, Raster<double>& out);

void conv_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weights,
                  std::span<const double> bias, std::span<double> out);
void conv_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weights,
                         std::span<double> grad_in);
void conv_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> grad_out,
                          std::span<double> grad_weights, std::span<double> grad_bias);

}  // namespace reference

}  // namespace qck::kernels
