#include "lytnet/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "lytnet/error.hpp"

namespace lytnet {

namespace {

constexpr double kMinDeterminant = 1e-9;
constexpr double kMinW = 1e-9;
constexpr double kSimplexTolerance = 1e-6;

int instruction_slot(EventKind kind) {
    switch (kind) {
        case EventKind::MoveLeft: return 0;
        case EventKind::MoveRight: return 1;
        case EventKind::RotateLeft: return 2;
        case EventKind::RotateRight: return 3;
        default: return -1;
    }
}

EventKind light_event(LightMode mode) {
    switch (mode) {
        case LightMode::Red: return EventKind::LightRed;
        case LightMode::Green: return EventKind::LightGreen;
        case LightMode::Countdown: return EventKind::LightCountdown;
        case LightMode::None: return EventKind::LightNone;
    }
    return EventKind::LightNone;
}

void check_simplex(const ClassProbabilities& probs) {
    double total = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw ValidationError("observation probabilities must be finite and nonnegative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) {
        throw ValidationError("observation probabilities sum to " + std::to_string(total));
    }
}

Coords clamped(const Coords& coords) {
    Coords out{};
    for (std::size_t i = 0; i < coords.size(); ++i) out[i] = std::clamp(coords[i], 0.0, 1.0);
    return out;
}

// Emits `kind` unless the same kind fired less than `spacing_ms` ago.
void emit_spaced(GuidanceState& state, std::vector<GuidanceEvent>& events, EventKind kind,
                 std::int64_t now, std::int64_t spacing_ms) {
    auto& last = state.last_instruction_ms[static_cast<std::size_t>(instruction_slot(kind))];
    if (last && now - *last < spacing_ms) return;
    last = now;
    events.push_back({now, kind, channel_for(kind)});
}

void emit(std::vector<GuidanceEvent>& events, EventKind kind, std::int64_t now) {
    events.push_back({now, kind, channel_for(kind)});
}

template <typename T>
T json_get(const nlohmann::json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(std::string("guidance config: bad value for '") + key + "'");
    }
}

}  // namespace

Homography::Homography(const std::array<double, 9>& rows) : m_(rows) {
    if (!std::all_of(m_.begin(), m_.end(), [](double v) { return std::isfinite(v); })) {
        throw ConfigurationError("homography entries must be finite");
    }
    if (!(std::abs(determinant()) > kMinDeterminant)) {
        throw ConfigurationError("homography is singular (|det| <= 1e-9)");
    }
}

Homography Homography::identity() { return Homography({1, 0, 0, 0, 1, 0, 0, 0, 1}); }

double Homography::determinant() const noexcept {
    const auto& a = m_;
    return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
           a[2] * (a[3] * a[7] - a[4] * a[6]);
}

Homography Homography::inverse() const {
    const auto& a = m_;
    const double inv_det = 1.0 / determinant();
    return Homography({
        (a[4] * a[8] - a[5] * a[7]) * inv_det,
        (a[2] * a[7] - a[1] * a[8]) * inv_det,
        (a[1] * a[5] - a[2] * a[4]) * inv_det,
        (a[5] * a[6] - a[3] * a[8]) * inv_det,
        (a[0] * a[8] - a[2] * a[6]) * inv_det,
        (a[2] * a[3] - a[0] * a[5]) * inv_det,
        (a[3] * a[7] - a[4] * a[6]) * inv_det,
        (a[1] * a[6] - a[0] * a[7]) * inv_det,
        (a[0] * a[4] - a[1] * a[3]) * inv_det,
    });
}

Point2 Homography::apply(Point2 p) const {
    const double x = m_[0] * p.x + m_[1] * p.y + m_[2];
    const double y = m_[3] * p.x + m_[4] * p.y + m_[5];
    const double w = m_[6] * p.x + m_[7] * p.y + m_[8];
    if (!(w > kMinW)) {
        throw DegeneratePointError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                   ") maps to or beyond the horizon");
    }
    return {x / w, y / w};
}

PositionInstruction position_instruction(double x_int, double width, double band) {
    const double mid = (width - 1.0) / 2.0;
    if (x_int > mid + width * band) return PositionInstruction::MoveLeft;
    if (x_int < mid - width * band) return PositionInstruction::MoveRight;
    return PositionInstruction::InRange;
}

RotationInstruction orientation_instruction(double delta_theta_deg, double band_deg) {
    if (delta_theta_deg < -band_deg) return RotationInstruction::RotateLeft;
    if (delta_theta_deg > band_deg) return RotationInstruction::RotateRight;
    return RotationInstruction::InRange;
}

Point2 to_pixels(double x_norm, double y_norm, int width, int height) {
    return {x_norm * (width - 1), y_norm * (height - 1)};
}

double delta_theta_deg(const Coords& coords, const Homography& h, int width, int height) {
    const Point2 start = h.apply(to_pixels(coords[0], coords[1], width, height));
    const Point2 end = h.apply(to_pixels(coords[2], coords[3], width, height));
    const double dx = end.x - start.x;
    const double dy = end.y - start.y;
    if (dx == 0.0 && dy == 0.0) throw UndefinedDirectionError("midline has zero length on the ground");

    const double cx = (width - 1) / 2.0;
    const Point2 foot = h.apply({cx, static_cast<double>(height - 1)});
    const Point2 ahead = h.apply({cx, (height - 1) / 2.0});
    const double fx = ahead.x - foot.x;
    const double fy = ahead.y - foot.y;
    if (fx == 0.0 && fy == 0.0) throw UndefinedDirectionError("camera-forward axis is degenerate");

    const double cross = fx * dy - fy * dx;
    const double dot = fx * dx + fy * dy;
    return std::atan2(cross, dot) * 180.0 / std::numbers::pi;
}

std::string_view to_string(LightMode mode) {
    switch (mode) {
        case LightMode::Red: return "red";
        case LightMode::Green: return "green";
        case LightMode::Countdown: return "countdown";
        case LightMode::None: return "none";
    }
    return "?";
}

SmoothedLight smoothed_light_mode(std::span<const ClassProbabilities> window,
                                  std::size_t required_frames, double threshold) {
    if (window.empty()) throw ValidationError("smoothed_light_mode needs at least one frame");
    ClassProbabilities sum{};
    for (const auto& frame : window) {
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += frame[c];
    }
    const double n = static_cast<double>(window.size());
    const std::array<double, kNumLightModes> modes = {
        sum[static_cast<std::size_t>(ClassId::Red)] / n,
        sum[static_cast<std::size_t>(ClassId::Green)] / n,
        (sum[static_cast<std::size_t>(ClassId::CountdownGreen)] +
         sum[static_cast<std::size_t>(ClassId::CountdownBlank)]) / n,
        sum[static_cast<std::size_t>(ClassId::None)] / n,
    };
    const auto best = std::max_element(modes.begin(), modes.end());
    SmoothedLight result;
    result.mode = static_cast<LightMode>(best - modes.begin());
    result.confidence = std::min(*best, 1.0);
    result.actionable = window.size() >= required_frames && result.confidence >= threshold;
    return result;
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::MoveLeft: return "MoveLeft";
        case EventKind::MoveRight: return "MoveRight";
        case EventKind::PositionOk: return "PositionOk";
        case EventKind::RotateLeft: return "RotateLeft";
        case EventKind::RotateRight: return "RotateRight";
        case EventKind::OrientationOk: return "OrientationOk";
        case EventKind::LightRed: return "LightRed";
        case EventKind::LightGreen: return "LightGreen";
        case EventKind::LightCountdown: return "LightCountdown";
        case EventKind::LightNone: return "LightNone";
    }
    return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
    for (int k = 0; k <= static_cast<int>(EventKind::LightNone); ++k) {
        if (to_string(static_cast<EventKind>(k)) == name) return static_cast<EventKind>(k);
    }
    return std::nullopt;
}

std::string_view to_string(Channel channel) {
    switch (channel) {
        case Channel::Voice: return "voice";
        case Channel::Vibration: return "vibration";
        case Channel::Beep1: return "beep1";
        case Channel::Beep2: return "beep2";
    }
    return "?";
}

Channel channel_for(EventKind kind) {
    switch (kind) {
        case EventKind::MoveLeft:
        case EventKind::MoveRight: return Channel::Vibration;
        case EventKind::RotateLeft: return Channel::Beep1;
        case EventKind::RotateRight: return Channel::Beep2;
        default: return Channel::Voice;
    }
}

std::string to_json_line(const GuidanceEvent& event) {
    std::string line = "{\"t_ms\":" + std::to_string(event.t_ms) + ",\"kind\":\"";
    line += to_string(event.kind);
    line += "\",\"channel\":\"";
    line += to_string(event.channel);
    line += "\"}";
    return line;
}

GuidanceConfig GuidanceConfig::from_json(std::string_view text) {
    const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError("guidance config is not a JSON object");
    static const std::set<std::string> known = {"homography",   "position_band",
                                                "angle_band_deg", "confidence_threshold",
                                                "window",       "renotify_ms",
                                                "light_repeat_ms"};
    for (const auto& item : j.items()) {
        if (!known.contains(item.key())) {
            throw FormatError("guidance config: unknown key '" + item.key() + "'");
        }
    }
    GuidanceConfig config;
    if (j.contains("homography")) {
        const auto rows = json_get<std::vector<double>>(j, "homography");
        if (rows.size() != 9) throw FormatError("guidance config: homography needs 9 numbers");
        std::array<double, 9> m{};
        std::copy(rows.begin(), rows.end(), m.begin());
        try {
            config.homography = Homography(m);
        } catch (const ConfigurationError& e) {
            throw FormatError(std::string("guidance config: ") + e.what());
        }
    }
    if (j.contains("position_band")) config.position_band = json_get<double>(j, "position_band");
    if (j.contains("angle_band_deg")) config.angle_band_deg = json_get<double>(j, "angle_band_deg");
    if (j.contains("confidence_threshold")) {
        config.confidence_threshold = json_get<double>(j, "confidence_threshold");
    }
    if (j.contains("window")) config.window = json_get<int>(j, "window");
    if (j.contains("renotify_ms")) config.renotify_ms = json_get<std::int64_t>(j, "renotify_ms");
    if (j.contains("light_repeat_ms")) {
        config.light_repeat_ms = json_get<std::int64_t>(j, "light_repeat_ms");
    }
    if (!(config.position_band >= 0.0 && config.position_band < 0.5)) {
        throw FormatError("guidance config: position_band must lie in [0, 0.5)");
    }
    if (!(config.angle_band_deg >= 0.0 && config.angle_band_deg < 180.0)) {
        throw FormatError("guidance config: angle_band_deg must lie in [0, 180)");
    }
    if (!(config.confidence_threshold >= 0.0 && config.confidence_threshold <= 1.0)) {
        throw FormatError("guidance config: confidence_threshold must lie in [0, 1]");
    }
    if (config.window < 1) throw FormatError("guidance config: window must be >= 1");
    if (config.renotify_ms < 0 || config.light_repeat_ms < 0) {
        throw FormatError("guidance config: timing values must be >= 0");
    }
    return config;
}

StepResult step(const GuidanceState& previous, const FrameObservation& obs, const GuidanceConfig& config) {
    if (previous.last_t_ms && obs.t_ms <= *previous.last_t_ms) {
        throw SessionError("timestamp " + std::to_string(obs.t_ms) + " ms does not follow " +
                           std::to_string(*previous.last_t_ms) + " ms");
    }
    if (obs.image_width < 2 || obs.image_height < 2) {
        throw ValidationError("observation image size must be at least 2x2");
    }
    check_simplex(obs.probabilities);

    StepResult result{previous, {}};
    GuidanceState& s = result.state;
    auto& events = result.events;
    const std::int64_t now = obs.t_ms;
    s.last_t_ms = now;
    s.window.push_back(obs.probabilities);
    while (s.window.size() > static_cast<std::size_t>(config.window)) s.window.pop_front();

    const Coords coords = clamped(obs.coords);

    // Position. A startpoint beyond the horizon gives no position this frame.
    std::optional<PositionInstruction> position;
    try {
        const Point2 ground = to_ground(to_pixels(coords[0], coords[1], obs.image_width, obs.image_height),
                                        config.homography);
        position = position_instruction(ground.x, obs.image_width, config.position_band);
    } catch (const DegeneratePointError&) {
    }
    if (position) {
        s.last_position = *position;
        if (*position == PositionInstruction::InRange) {
            if (s.stage == Stage::Positioning) {
                emit(events, EventKind::PositionOk, now);
                s.stage = Stage::Orienting;
            }
        } else {
            s.stage = Stage::Positioning;
            emit_spaced(s, events,
                        *position == PositionInstruction::MoveLeft ? EventKind::MoveLeft
                                                                    : EventKind::MoveRight,
                        now, config.renotify_ms);
        }
    }

    // Orientation, only once positioned.
    if (position && s.stage != Stage::Positioning) {
        std::optional<RotationInstruction> rotation;
        try {
            rotation = orientation_instruction(
                delta_theta_deg(coords, config.homography, obs.image_width, obs.image_height),
                config.angle_band_deg);
        } catch (const UndefinedDirectionError&) {
        } catch (const DegeneratePointError&) {
        }
        if (rotation) {
            s.last_rotation = *rotation;
            if (*rotation == RotationInstruction::InRange) {
                if (s.stage == Stage::Orienting) {
                    emit(events, EventKind::OrientationOk, now);
                    s.stage = Stage::Monitoring;
                }
            } else {
                s.stage = Stage::Orienting;
                emit_spaced(s, events,
                            *rotation == RotationInstruction::RotateLeft ? EventKind::RotateLeft
                                                                         : EventKind::RotateRight,
                            now, config.renotify_ms);
            }
        }
    }

    // Light, only once positioned and oriented.
    if (s.stage == Stage::Monitoring) {
        const std::vector<ClassProbabilities> window(s.window.begin(), s.window.end());
        const SmoothedLight light = smoothed_light_mode(window, static_cast<std::size_t>(config.window),
                                                        config.confidence_threshold);
        if (light.actionable) {
            auto& last = s.last_light_ms[static_cast<std::size_t>(light.mode)];
            if (!last || now - *last >= config.light_repeat_ms) {
                last = now;
                s.last_light = light.mode;
                emit(events, light_event(light.mode), now);
            }
        }
    }
    return result;
}

std::vector<GuidanceEvent> GuidanceSession::process(const FrameObservation& obs) {
    StepResult result = step(state_, obs, config_);
    state_ = std::move(result.state);
    return std::move(result.events);
}

}  // namespace lytnet
