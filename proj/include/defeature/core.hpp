#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace defeature {

enum class ErrorCode {
    NonAlignedRegion,
    OverlappingFS,
    EmptyRegion,
    UnknownRegion,
    BadElement,
    MeshMismatch,
    MissingMaterial,
    InvalidPermittivity,
    NoDirichletNodes,
    MissingDirichletValue,
    SingularSystem,
    NotConverged,
    EmptyInterface,
    NegativeNorm,
    ZeroQoI,
    UnknownExperiment,
    Config,
    Parse,
};

constexpr std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::NonAlignedRegion: return "NonAlignedRegion";
    case ErrorCode::OverlappingFS: return "OverlappingFS";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::BadElement: return "BadElement";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::MissingMaterial: return "MissingMaterial";
    case ErrorCode::InvalidPermittivity: return "InvalidPermittivity";
    case ErrorCode::NoDirichletNodes: return "NoDirichletNodes";
    case ErrorCode::MissingDirichletValue: return "MissingDirichletValue";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::EmptyInterface: return "EmptyInterface";
    case ErrorCode::NegativeNorm: return "NegativeNorm";
    case ErrorCode::ZeroQoI: return "ZeroQoI";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

struct RegionId {
    int value = 0;
    auto operator<=>(const RegionId&) const = default;
};

struct BoundaryTag {
    int value = 0;
    auto operator<=>(const BoundaryTag&) const = default;
};

using NodeIndex = std::size_t;
using ElementIndex = std::size_t;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }

    bool contains(Point p, double tol = 0.0) const {
        return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
    }

    // positive-area overlap of the open rectangles
    bool overlaps(const Rect& o) const {
        return std::min(x1, o.x1) > std::max(x0, o.x0) && std::min(y1, o.y1) > std::max(y0, o.y0);
    }
};

} // namespace defeature
