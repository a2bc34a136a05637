#include "lytnet/classes.hpp"

#include <string>

#include "lytnet/error.hpp"

namespace lytnet {

namespace {

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "red", "green", "countdown_green", "countdown_blank", "none"};

}  // namespace

std::string_view class_name(ClassId id) { return kNames[static_cast<std::size_t>(index_of(id))]; }

std::optional<ClassId> parse_class(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) return static_cast<ClassId>(i);
    }
    return std::nullopt;
}

ClassId class_from_index(int index) {
    if (index < 0 || index >= kNumClasses) {
        throw ValidationError("class index " + std::to_string(index) + " outside [0, 5)");
    }
    return static_cast<ClassId>(index);
}

}  // namespace lytnet
