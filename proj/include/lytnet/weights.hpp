#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lytnet/network_spec.hpp"

namespace lytnet {

/// Raw named tensor as stored on disk (dtype is always f32).
struct WeightTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    bool operator==(const WeightTensor&) const = default;
};

/// Per-channel input normalization applied after pixel/255.
struct InputNormalization {
    std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
    std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};

    bool operator==(const InputNormalization&) const = default;
};

struct WeightHeader {
    std::vector<std::string> class_order;
    std::optional<InputNormalization> normalization;

    bool operator==(const WeightHeader&) const = default;
};

/// Contents of a ".lyt2" file.
///
/// Layout (little-endian):
///   "LYT2" | u32 version (1) | u32 tensor_count | u32 header_len | header JSON
///   then per tensor: u16 name_len | name | u8 dtype (0 = f32) | u8 ndim |
///   u32 dims[ndim] | f32 data[prod(dims)]
/// Anything after the last tensor is a format error.
struct WeightFile {
    WeightHeader header;
    std::map<std::string, WeightTensor> tensors;

    bool operator==(const WeightFile&) const = default;
};

inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<std::byte> serialize_weights(const WeightFile& weights);
/// Throws FormatError on any malformed, truncated or over-long input.
WeightFile parse_weights(std::span<const std::byte> bytes);

void write_weights(const std::filesystem::path& path, const WeightFile& weights);
WeightFile load_weights(const std::filesystem::path& path);

/// A tensor name the model expects, with its dims.
struct WeightSlot {
    std::string name;
    std::vector<std::uint32_t> dims;
    bool required = true;
};

/// Every slot of `spec`, in row order. Conv weights are [out, in, k, k],
/// depthwise [channels, 1, k, k], SE and FC matrices [out, in]; per-channel
/// vectors are [channels]. Conv `.bias` slots are optional.
std::vector<WeightSlot> weight_slots(const NetworkSpec& spec);

struct ShapeMismatch {
    std::string name;
    std::vector<std::uint32_t> expected;
    std::vector<std::uint32_t> actual;
};

struct WeightReport {
    std::vector<std::string> missing;
    std::vector<std::string> dangling;
    std::vector<ShapeMismatch> mismatched;
    std::vector<std::string> non_finite;
    std::optional<std::string> header_problem;

    bool ok() const noexcept {
        return missing.empty() && dangling.empty() && mismatched.empty() && non_finite.empty() &&
               !header_problem;
    }
    /// One line per problem; empty when ok().
    std::string describe() const;
};

WeightReport validate_weights(const WeightFile& weights, const NetworkSpec& spec);

/// Fills every required slot with uniform(-a, a), a = sqrt(6 / fan_in); scales
/// are 1 and shifts/biases 0. Deterministic in `seed`.
WeightFile make_random_weights(const NetworkSpec& spec, std::uint64_t seed);
WeightFile make_zero_weights(const NetworkSpec& spec);

std::string dims_to_string(std::span<const std::uint32_t> dims);

}  // namespace lytnet
