#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lytnet/classes.hpp"

namespace lytnet {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Image-plane to ground-plane (bird's-eye) projective map. The ground frame is
/// expressed in bird's-eye image pixels, so its x axis has the same units as
/// the camera image width.
class Homography {
public:
    /// Row-major 3x3. Throws ConfigurationError unless |det| > 1e-9.
    explicit Homography(const std::array<double, 9>& rows);
    static Homography identity();

    /// Dehomogenized H [x, y, 1]^T. Throws DegeneratePointError when the
    /// projective w-component is <= 1e-9 (point on or beyond the horizon).
    Point2 apply(Point2 point) const;
    Homography inverse() const;
    double determinant() const noexcept;
    const std::array<double, 9>& rows() const noexcept { return m_; }

private:
    std::array<double, 9> m_;
};

inline Point2 to_ground(Point2 image_point, const Homography& h) { return h.apply(image_point); }

enum class PositionInstruction { MoveLeft, MoveRight, InRange };
enum class RotationInstruction { RotateLeft, RotateRight, InRange };

/// MoveLeft if x_int > (w-1)/2 + band*w, MoveRight if x_int < (w-1)/2 - band*w.
/// Both comparisons are strict; equality is InRange.
PositionInstruction position_instruction(double x_int, double width, double band = 0.085);

/// RotateLeft if delta < -band, RotateRight if delta > band (strict).
RotationInstruction orientation_instruction(double delta_theta_deg, double band_deg = 10.0);

/// Normalized [0,1] image coords to pixel-index coords, x * (w-1), y * (h-1),
/// so 0.5 lands exactly on the (w-1)/2 midline.
Point2 to_pixels(double x_norm, double y_norm, int width, int height);

/// Signed angle in degrees between the ground-frame midline (start -> end) and
/// camera-forward, taken as the ground image of the segment from the bottom
/// center of the image to its center. Positive means the crossing tilts to the
/// right of forward. Throws UndefinedDirectionError for a zero-length midline.
double delta_theta_deg(const Coords& coords, const Homography& h, int width, int height);

/// Announcement modes: countdown_green and countdown_blank merge into Countdown.
enum class LightMode { Red = 0, Green = 1, Countdown = 2, None = 3 };
inline constexpr int kNumLightModes = 4;

std::string_view to_string(LightMode mode);

struct SmoothedLight {
    LightMode mode = LightMode::None;
    double confidence = 0.0;
    bool actionable = false;
};

/// Averages the window element-wise, merges countdown mass, and returns the
/// argmax mode (first mode wins ties). Actionable only when the window holds
/// `required_frames` vectors and confidence >= `threshold`.
SmoothedLight smoothed_light_mode(std::span<const ClassProbabilities> window,
                                  std::size_t required_frames = 5, double threshold = 0.8);

enum class EventKind {
    MoveLeft,
    MoveRight,
    PositionOk,
    RotateLeft,
    RotateRight,
    OrientationOk,
    LightRed,
    LightGreen,
    LightCountdown,
    LightNone,
};

enum class Channel { Voice, Vibration, Beep1, Beep2 };

std::string_view to_string(EventKind kind);
std::string_view to_string(Channel channel);
std::optional<EventKind> parse_event_kind(std::string_view name);

/// Fixed mapping: moves vibrate, RotateLeft is one beep, RotateRight two,
/// everything else is a voice message.
Channel channel_for(EventKind kind);

struct GuidanceEvent {
    std::int64_t t_ms = 0;
    EventKind kind = EventKind::PositionOk;
    Channel channel = Channel::Voice;

    bool operator==(const GuidanceEvent&) const = default;
};

/// {"t_ms":<int>,"kind":"<kind>","channel":"<channel>"} with no trailing newline.
std::string to_json_line(const GuidanceEvent& event);

struct GuidanceConfig {
    Homography homography = Homography::identity();
    double position_band = 0.085;
    double angle_band_deg = 10.0;
    double confidence_threshold = 0.8;
    int window = 5;
    std::int64_t renotify_ms = 2000;
    std::int64_t light_repeat_ms = 3000;

    /// Parses the config JSON; absent keys keep their defaults. Throws
    /// FormatError on unknown keys, wrong types or out-of-range values.
    static GuidanceConfig from_json(std::string_view text);
};

struct FrameObservation {
    std::int64_t t_ms = 0;
    ClassProbabilities probabilities{};
    Coords coords{};
    int image_width = 768;
    int image_height = 576;
};

enum class Stage { Positioning, Orienting, Monitoring };

struct GuidanceState {
    Stage stage = Stage::Positioning;
    std::deque<ClassProbabilities> window;
    std::optional<std::int64_t> last_t_ms;

    std::optional<PositionInstruction> last_position;
    std::optional<RotationInstruction> last_rotation;
    std::optional<LightMode> last_light;

    /// Last emission time per instruction kind: MoveLeft, MoveRight, RotateLeft, RotateRight.
    std::array<std::optional<std::int64_t>, 4> last_instruction_ms{};
    /// Last announcement time per LightMode.
    std::array<std::optional<std::int64_t>, kNumLightModes> last_light_ms{};
};

struct StepResult {
    GuidanceState state;
    std::vector<GuidanceEvent> events;
};

/// One frame of the guidance loop: position, then orientation (only once
/// positioned), then light announcement (only once oriented).
///
/// Timing: an instruction kind is emitted at most once per renotify_ms, a
/// left/right flip emits at once unless that kind itself fired within
/// renotify_ms; entering range emits a single PositionOk / OrientationOk;
/// a light mode is announced when the smoothed window is actionable, at most
/// once per light_repeat_ms per mode, so a mode change is announced at once.
/// Leaving range drops back to the earlier stage.
///
/// Throws SessionError if obs.t_ms does not exceed the last processed time and
/// ValidationError if the probabilities are not a simplex point.
StepResult step(const GuidanceState& state, const FrameObservation& obs, const GuidanceConfig& config);

/// Convenience owner of a GuidanceState.
class GuidanceSession {
public:
    explicit GuidanceSession(GuidanceConfig config = {}) : config_(std::move(config)) {}

    std::vector<GuidanceEvent> process(const FrameObservation& obs);
    void reset() { state_ = GuidanceState{}; }

    const GuidanceState& state() const noexcept { return state_; }
    const GuidanceConfig& config() const noexcept { return config_; }

private:
    GuidanceConfig config_;
    GuidanceState state_;
};

}  // namespace lytnet
