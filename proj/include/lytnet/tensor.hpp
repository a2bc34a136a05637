#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lytnet {

/// Channel-major (C, H, W) extent. Rank-1 vectors are represented as (n, 1, 1).
struct Shape {
    int channels = 1;
    int height = 1;
    int width = 1;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    std::size_t plane() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Dense float32 feature map, data laid out channel-major then row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor vector(std::vector<float> values);

    const Shape& shape() const noexcept { return shape_; }
    int channels() const noexcept { return shape_.channels; }
    int height() const noexcept { return shape_.height; }
    int width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    std::span<float> channel(int c) noexcept {
        return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane(),
                                               shape_.plane());
    }
    std::span<const float> channel(int c) const noexcept {
        return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane(),
                                                     shape_.plane());
    }

    float& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
    float at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

    bool all_finite() const noexcept;

    bool operator==(const Tensor&) const = default;

private:
    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_.height) +
                static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(shape_.width) +
               static_cast<std::size_t>(x);
    }

    Shape shape_{};
    std::vector<float> data_ = std::vector<float>(1, 0.0f);
};

}  // namespace lytnet
