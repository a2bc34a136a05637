#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace lytnet {

inline constexpr int kNumClasses = 5;
inline constexpr int kNumCoords = 4;

/// Network class order. Index i of the logit vector is ClassId(i).
enum class ClassId : int {
    Red = 0,
    Green = 1,
    CountdownGreen = 2,
    CountdownBlank = 3,
    None = 4,
};

inline constexpr std::array<ClassId, kNumClasses> kAllClasses = {
    ClassId::Red, ClassId::Green, ClassId::CountdownGreen, ClassId::CountdownBlank, ClassId::None};

/// "red", "green", "countdown_green", "countdown_blank", "none".
std::string_view class_name(ClassId id);
std::optional<ClassId> parse_class(std::string_view name);

/// Throws ValidationError unless 0 <= index < kNumClasses.
ClassId class_from_index(int index);

inline int index_of(ClassId id) { return static_cast<int>(id); }

/// [x_start, y_start, x_end, y_end], normalized to [0, 1] of image width/height.
using Coords = std::array<double, kNumCoords>;
using ClassProbabilities = std::array<double, kNumClasses>;

}  // namespace lytnet
