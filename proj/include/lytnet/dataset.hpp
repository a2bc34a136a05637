#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "lytnet/classes.hpp"
#include "lytnet/tensor.hpp"

namespace lytnet {

/// One labeled image. Coordinates are [xs, ys, xe, ye] normalized by the image
/// width/height (x * W gives the continuous pixel position).
struct Sample {
    Tensor image;  // (3, H, W), values in [0, 1]
    ClassId cls = ClassId::None;
    Coords coords{};
};

struct LabelRecord {
    std::filesystem::path image_path;  // resolved against the label file directory
    ClassId cls = ClassId::None;
    Coords coords{};
    int line = 0;
};

struct LabelFile {
    std::vector<LabelRecord> records;
};

/// CSV with header `path,class,xs,ys,xe,ye`. Relative paths resolve against
/// `base_dir`. Throws FormatError("<line>: ...") on malformed rows, unknown
/// classes, coordinates outside [0, 1] and duplicate paths.
LabelFile parse_labels(std::string_view text, const std::filesystem::path& base_dir = {});
LabelFile load_labels(const std::filesystem::path& csv_path);

/// Binary PPM (P6) with maxval <= 255, as a (3, H, W) tensor of byte / maxval.
Tensor parse_ppm(std::span<const std::byte> bytes);
Tensor load_image(const std::filesystem::path& path);

/// Encodes a 3-channel tensor as P6 with maxval 255 (values clamped, rounded).
std::vector<std::byte> encode_ppm(const Tensor& image);
void write_ppm(const std::filesystem::path& path, const Tensor& image);

/// Crops the window with top-left (x0, y0) and size width x height. Coordinates
/// move to the crop frame, x' = (x * W - x0) / width, and are clamped to [0, 1].
Sample crop(const Sample& sample, int x0, int y0, int width, int height);
/// Crop at an offset drawn uniformly from every valid position.
Sample random_crop(const Sample& sample, int width, int height, std::uint64_t seed);

/// Mirrors the image and maps x -> 1 - x for both endpoints.
Sample flip_horizontal(const Sample& sample);
Sample random_horizontal_flip(const Sample& sample, double probability, std::uint64_t seed);

/// Ranges for photometric jitter. Brightness, contrast and saturation factors
/// are drawn from [1 - r, 1 + r] (floored at 0); hue shift from [-r, r] turns.
struct JitterRanges {
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.4;
    double hue = 0.1;
};

struct JitterFactors {
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue_turns = 0.0;
};

Tensor adjust_brightness(const Tensor& image, double factor);
/// Blend with the mean luma (0.299 R + 0.587 G + 0.114 B) of the whole image.
Tensor adjust_contrast(const Tensor& image, double factor);
/// Blend with each pixel's luma.
Tensor adjust_saturation(const Tensor& image, double factor);
/// Rotates hue in HSV space by `turns` (1 turn = 360 degrees).
Tensor adjust_hue(const Tensor& image, double turns);

JitterFactors draw_jitter(const JitterRanges& ranges, std::uint64_t seed);
/// Brightness, then contrast, then saturation, then hue; clamped to [0, 1] after each.
Tensor apply_jitter(const Tensor& image, const JitterFactors& factors);
Sample color_jitter(const Sample& sample, const JitterRanges& ranges, std::uint64_t seed);

/// Bilinear resampling with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& image, int width, int height);

struct AugmentConfig {
    int crop_width = 768;
    int crop_height = 576;
    double flip_probability = 0.5;
    JitterRanges jitter{};
};

/// random_crop -> random_horizontal_flip -> color_jitter with sub-seeds derived from `seed`.
Sample augment(const Sample& sample, const AugmentConfig& config, std::uint64_t seed);

}  // namespace lytnet
