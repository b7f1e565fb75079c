#pragma once

#include <stdexcept>
#include <string>

namespace roughlab {

/// Rejected input: bad parameters, unknown registry key, inadmissible geometry.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mesh generation could not honour its constraints.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point lies outside the triangulation beyond the snapping tolerance.
class LocateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nonlinear or linear solver failure.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace roughlab
