#pragma once
// Shared vocabulary for the ompnav library: points, angles and the error type
// every module throws.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace ompnav {

using Vec2 = Eigen::Vector2d;

enum class ErrorCode {
    OutOfBounds,
    OutOfRange,
    GridMismatch,
    DimensionMismatch,
    ShapeMismatch,
    NonFiniteWeights,
    BadMagic,
    TruncatedFile,
    ChecksumMismatch,
    NoPathFound,
    StartInCollision,
    Infeasible,
    SingularInnerMatrix,
    ScenarioInvalid,
    InvalidArgument,
    Io,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteWeights: return "NonFiniteWeights";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::NoPathFound: return "NoPathFound";
        case ErrorCode::StartInCollision: return "StartInCollision";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::SingularInnerMatrix: return "SingularInnerMatrix";
        case ErrorCode::ScenarioInvalid: return "ScenarioInvalid";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

inline Vec2 heading_vector(double theta) { return {std::cos(theta), std::sin(theta)}; }

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Distance from p to the closed segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

}  // namespace ompnav
