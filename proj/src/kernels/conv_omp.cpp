#include <algorithm>

#include "qck/kernels.hpp"
#include "qck/parallel.hpp"

namespace qck::kernels {

namespace {

// Valid output-x range for which x + dx stays inside [0, width).
struct Span1 {
    int begin;
    int end;
};
inline Span1 valid_range(int width, int dx) { return {std::max(0, -dx), std::min(width, width - dx)}; }

inline int parallel_width(int work_items) { return std::max(1, std::min(threads(), work_items)); }

}  // namespace

void conv_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weights,
                  std::span<const double> bias, std::span<double> out) {
    const int pad = s.ksize / 2;
    const int H = s.height;
    const int W = s.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
#pragma omp parallel for num_threads(parallel_width(s.out_channels)) schedule(static)
    for (int o = 0; o < s.out_channels; ++o) {
        double* dst = out.data() + o * plane;
        std::fill(dst, dst + plane, bias[static_cast<std::size_t>(o)]);
        for (int i = 0; i < s.in_channels; ++i) {
            const double* src = in.data() + i * plane;
            const double* w = weights.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * s.ksize * s.ksize;
            for (int ky = 0; ky < s.ksize; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy);
                const int y1 = std::min(H, H - dy);
                for (int kx = 0; kx < s.ksize; ++kx) {
                    const int dx = kx - pad;
                    const double wv = w[ky * s.ksize + kx];
                    const auto r = valid_range(W, dx);
                    for (int y = y0; y < y1; ++y) {
                        double* drow = dst + static_cast<std::size_t>(y) * W;
                        const double* srow = src + static_cast<std::size_t>(y + dy) * W + dx;
#pragma omp simd
                        for (int x = r.begin; x < r.end; ++x) drow[x] += wv * srow[x];
                    }
                }
            }
        }
    }
}

void conv_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weights,
                         std::span<double> grad_in) {
    const int pad = s.ksize / 2;
    const int H = s.height;
    const int W = s.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
#pragma omp parallel for num_threads(parallel_width(s.in_channels)) schedule(static)
    for (int i = 0; i < s.in_channels; ++i) {
        double* dst = grad_in.data() + i * plane;
        std::fill(dst, dst + plane, 0.0);
        for (int o = 0; o < s.out_channels; ++o) {
            const double* go = grad_out.data() + o * plane;
            const double* w = weights.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * s.ksize * s.ksize;
            for (int ky = 0; ky < s.ksize; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy);
                const int y1 = std::min(H, H - dy);
                for (int kx = 0; kx < s.ksize; ++kx) {
                    const int dx = kx - pad;
                    const double wv = w[ky * s.ksize + kx];
                    const auto r = valid_range(W, dx);
                    // out(y, x) read in(y + dy, x + dx); scatter back along the same offsets.
                    for (int y = y0; y < y1; ++y) {
                        double* drow = dst + static_cast<std::size_t>(y + dy) * W + dx;
                        const double* grow = go + static_cast<std::size_t>(y) * W;
#pragma omp simd
                        for (int x = r.begin; x < r.end; ++x) drow[x] += wv * grow[x];
                    }
                }
            }
        }
    }
}

void conv_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> grad_out,
                          std::span<double> grad_weights, std::span<double> grad_bias) {
    const int pad = s.ksize / 2;
    const int H = s.height;
    const int W = s.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
#pragma omp parallel for num_threads(parallel_width(s.out_channels)) schedule(static)
    for (int o = 0; o < s.out_channels; ++o) {
        const double* go = grad_out.data() + o * plane;
        double gb = 0.0;
        for (std::size_t p = 0; p < plane; ++p) gb += go[p];
        grad_bias[static_cast<std::size_t>(o)] += gb;
        for (int i = 0; i < s.in_channels; ++i) {
            const double* src = in.data() + i * plane;
            double* gw = grad_weights.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * s.ksize * s.ksize;
            for (int ky = 0; ky < s.ksize; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy);
                const int y1 = std::min(H, H - dy);
                for (int kx = 0; kx < s.ksize; ++kx) {
                    const int dx = kx - pad;
                    const auto r = valid_range(W, dx);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = go + static_cast<std::size_t>(y) * W;
                        const double* srow = src + static_cast<std::size_t>(y + dy) * W + dx;
#pragma omp simd reduction(+ : acc)
                        for (int x = r.begin; x < r.end; ++x) acc += grow[x] * srow[x];
                    }
                    gw[ky * s.ksize + kx] += acc;
                }
            }
        }
    }
}

}  // namespace qck::kernels
