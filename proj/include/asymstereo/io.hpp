#pragma once

#include <string>

#include "asymstereo/image.hpp"

namespace asymstereo {

enum class DisparityFormat { Pfm, KittiPng16 };

/// Load a PNG or PPM/PGM image, scaled to [0,1] (8-bit: v/255, 16-bit:
/// v/65535). Throws std::runtime_error on unreadable files or unsupported
/// bit depths. Images smaller than 8x8 are rejected.
Image load_image(const std::string& path);

/// Write an image as 8-bit (default) or 16-bit PNG/PPM/PGM, by extension.
void save_image(const Image& img, const std::string& path, int bit_depth = 8);

/// Disparity ingestion.
///  - Pfm: Middlebury convention. Negative scale means little-endian data
///    stored bottom-up; positive scale means big-endian stored top-down.
///    Non-finite values are flagged invalid.
///  - KittiPng16: uint16 PNG, disparity = value/256, value 0 invalid.
DisparityMap load_disparity(const std::string& path, DisparityFormat format);

/// Write disparity as single-channel PFM with scale -1.0 (little-endian,
/// bottom-up). Values round-trip bit-exactly at float32 precision. Invalid
/// pixels are written as +inf.
void save_disparity(const DisparityMap& d, const std::string& path);

/// Render disparity to an 8-bit PNG: [0, d_max] mapped through the viridis
/// colormap, invalid pixels black.
void render_disparity(const DisparityMap& d, const std::string& path, double d_max);

}  // namespace asymstereo
