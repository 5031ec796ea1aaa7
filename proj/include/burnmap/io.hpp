#pragma once

#include <array>
#include <string>
#include <vector>

#include "burnmap/lsci.hpp"
#include "burnmap/types.hpp"

namespace burnmap {

// On-disk layout: <base>.hdr.json sidecar + <base>.raw of little-endian
// float32, band-interleaved-by-pixel. Masks, when not all-true, land in
// <base>.mask.raw (uint8, row-major). LabelMap payloads are uint16.

void write_cube(const HyperCube& cube, const std::string& base);
HyperCube read_cube(const std::string& base);

void write_scalar_map(const ScalarMap& map, const std::string& base);
ScalarMap read_scalar_map(const std::string& base);

void write_label_map(const LabelMap& map, const std::string& base);
LabelMap read_label_map(const std::string& base);

void write_frame_stack(const FrameStack& stack, const std::string& base);
FrameStack read_frame_stack(const std::string& base);

/// Grayscale render, min-max scaled over unmasked pixels; masked = black.
void write_map_png(const ScalarMap& map, const std::string& path);

/// Fixed 4-color class palette (see label_palette); masked = black.
void write_label_png(const LabelMap& map, const std::string& path);
std::array<std::array<std::uint8_t, 3>, 4> label_palette();

/// CSV grid of values, one image row per line; masked cells print "nan".
void write_map_csv(const ScalarMap& map, const std::string& path);
void write_label_csv(const LabelMap& map, const std::string& path);

// Low-level PNG writers (8-bit).
void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels);
void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);

// Small CSV helpers shared by the acquisition/indices interfaces.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& preamble = {});
struct CsvTable {
    std::vector<std::string> preamble; // leading '#' lines, verbatim
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

} // namespace burnmap
