#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bokeh/image.hpp"

namespace bokeh {

/// Decodes an 8- or 16-bit PNG. Gray stays 1-channel, everything else becomes
/// RGB; alpha is dropped. Samples are code / max_code, tagged Gamma22.
ImagePlane decode_png(std::span<const std::uint8_t> bytes);
ImagePlane load_image(const std::filesystem::path& path);

/// 8-bit PNG. Linear images are gamma-encoded before quantization. Output is
/// deterministic (no timestamps, fixed compression settings).
std::vector<std::uint8_t> encode_png(const ImagePlane& img);
void save_image(const ImagePlane& img, const std::filesystem::path& path);

/// 16-bit gray PNG or PFM, selected by extension (".pfm" or anything else).
/// min-max normalized, see normalize_disparity.
DisparityMap decode_disparity_png(std::span<const std::uint8_t> bytes);
DisparityMap load_disparity(const std::filesystem::path& path);

/// 16-bit gray PNG with code = round(d * 65535).
std::vector<std::uint8_t> encode_disparity_png(const DisparityMap& disp);
void save_disparity(const DisparityMap& disp, const std::filesystem::path& path);

/// Little-endian grayscale PFM ("Pf", negative scale), rows stored bottom-up.
void save_pfm(std::span<const float> values, int width, int height,
              const std::filesystem::path& path);

/// Applies the same 16-bit quantization and normalization a save/load
/// round-trip would, without touching the file system.
DisparityMap quantize_disparity(const DisparityMap& disp);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bokeh
