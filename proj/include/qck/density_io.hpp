#pragma once

#include <iosfwd>
#include <string>

#include "qck/density.hpp"

namespace qck {

// QDM1 raster: "QDM1", u32 width, u32 height, u32 level code, then
// width*height float32, all little-endian, row-major.
void write_qdm(std::ostream& out, const DensityMap& map);
DensityMap read_qdm(std::istream& in);

void save_qdm(const std::string& path, const DensityMap& map);
DensityMap load_qdm(const std::string& path);

}  // namespace qck
