#include "qck/kernels.hpp"

namespace qck::kernels::reference {

namespace {

std::size_t widx(const ConvShape& s, int o, int i, int ky, int kx) {
    return ((static_cast<std::size_t>(o) * s.in_channels + i) * s.ksize + ky) * s.ksize + kx;
}

std::size_t aidx(const ConvShape& s, int c, int y, int x) {
    return (static_cast<std::size_t>(c) * s.height + y) * s.width + x;
}

}  // namespace

void conv_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weights,
                  std::span<const double> bias, std::span<double> out) {
    const int pad = s.ksize / 2;
    for (int o = 0; o < s.out_channels; ++o)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double acc = bias[static_cast<std::size_t>(o)];
                for (int i = 0; i < s.in_channels; ++i)
                    for (int ky = 0; ky < s.ksize; ++ky)
                        for (int kx = 0; kx < s.ksize; ++kx) {
                            const int iy = y + ky - pad;
                            const int ix = x + kx - pad;
                            if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                            acc += weights[widx(s, o, i, ky, kx)] * in[aidx(s, i, iy, ix)];
                        }
                out[aidx(s, o, y, x)] = acc;
            }
}

void conv_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weights,
                         std::span<double> grad_in) {
    const int pad = s.ksize / 2;
    for (int i = 0; i < s.in_channels; ++i)
        for (int iy = 0; iy < s.height; ++iy)
            for (int ix = 0; ix < s.width; ++ix) {
                double acc = 0.0;
                for (int o = 0; o < s.out_channels; ++o)
                    for (int ky = 0; ky < s.ksize; ++ky)
                        for (int kx = 0; kx < s.ksize; ++kx) {
                            const int y = iy - ky + pad;
                            const int x = ix - kx + pad;
                            if (y < 0 || y >= s.height || x < 0 || x >= s.width) continue;
                            acc += weights[widx(s, o, i, ky, kx)] * grad_out[aidx(s, o, y, x)];
                        }
                grad_in[aidx(s, i, iy, ix)] = acc;
            }
}

void conv_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> grad_out,
                          std::span<double> grad_weights, std::span<double> grad_bias) {
    const int pad = s.ksize / 2;
    for (int o = 0; o < s.out_channels; ++o) {
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) grad_bias[static_cast<std::size_t>(o)] += grad_out[aidx(s, o, y, x)];
        for (int i = 0; i < s.in_channels; ++i)
            for (int ky = 0; ky < s.ksize; ++ky)
                for (int kx = 0; kx < s.ksize; ++kx) {
                    double acc = 0.0;
                    for (int y = 0; y < s.height; ++y)
                        for (int x = 0; x < s.width; ++x) {
                            const int iy = y + ky - pad;
                            const int ix = x + kx - pad;
                            if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                            acc += grad_out[aidx(s, o, y, x)] * in[aidx(s, i, iy, ix)];
                        }
                    grad_weights[widx(s, o, i, ky, kx)] += acc;
                }
    }
}

}  // namespace qck::kernels::reference
