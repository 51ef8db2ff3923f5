#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qck/annotations.hpp"
#include "qck/density.hpp"
#include "qck/raster.hpp"
#include "qck/train.hpp"

namespace qck {

struct Patch {
    std::string image_id;
    int x = 0;  // origin in the (zero-padded) source image
    int y = 0;
    int size = 0;
    GrayImage pixels;
    AnnotationSet ann_subset;  // re-origined to the patch
};

// Heads with x0 <= x < x0 + w and y0 <= y < y0 + h, shifted to the window origin.
AnnotationSet clip_annotations(const AnnotationSet& ann, int x0, int y0, int w, int h, std::string id);

// Draws n patches. Sizes cycle through `sizes` in order; each origin is drawn
// with probability proportional to the number of heads inside the window plus
// epsilon. Images smaller than a size are zero-padded on the right/bottom.
std::vector<Patch> sample_patches(const GrayImage& image, const AnnotationSet& ann, std::span<const int> sizes,
                                  int n, std::uint64_t seed, double epsilon = 1.0);

struct CellOrigin {
    int x = 0;
    int y = 0;
    bool operator==(const CellOrigin&) const = default;
};

struct TileGrid {
    int padded_width = 0;
    int padded_height = 0;
    int cell_size = 224;
    int cols = 0;
    int rows = 0;
    std::vector<CellOrigin> cells;  // row-major
};

TileGrid tile_image(int width, int height, int cell_size = 224);
TileGrid tile_image(const GrayImage& image, int cell_size = 224);

// Cell pixels (zero where padded) and the heads inside the half-open cell.
Patch extract_cell(const GrayImage& image, const AnnotationSet& ann, const TileGrid& grid, std::size_t index);

double aggregate_counts(std::span<const double> cell_counts);

// Resizes a patch to the network input and renders its target stack from
// the resized head positions.
TrainSample make_training_sample(const Patch& patch, int input_size, const std::vector<Level>& levels,
                                 const KernelPolicy& policy, int downsample);

}  // namespace qck
