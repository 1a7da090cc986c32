#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "freemesh/transform.hpp"

namespace freemesh {

// Tree file, little-endian throughout:
//
//   header  "FMT1" | lmax u32 | rank u32 | tau f64 | domain_lo 3xf64 |
//           domain_hi 3xf64 | node_count u64
//   nodes   preorder; each: center 3xf64 | half_width f64 | child_mask u8 |
//           point_count u64 | residual_rms f64 | coeffs rank x f64
//
// Bit o-1 of child_mask is set iff child octant o follows. Coefficients are in
// MomentBasis column order.
inline constexpr char kTreeMagic[3] = {'F', 'M', 'T'};
inline constexpr char kTreeVersion = '1';

std::vector<std::uint8_t> serialize(const FmtTree& tree);

// Throws FormatError (with byte offset) on malformed input and VersionError
// when the header names another format version.
FmtTree deserialize(std::span<const std::uint8_t> bytes);

void write_tree_file(const std::filesystem::path& path, const FmtTree& tree);
FmtTree read_tree_file(const std::filesystem::path& path);

}  // namespace freemesh
