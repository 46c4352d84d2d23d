#pragma once

#include <stdexcept>
#include <string>

namespace twinlink {

/// Base class for all twinlink errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text (XML, JSON, CSV). Message carries location info when known.
struct ParseError : Error {
  using Error::Error;
};

/// Input uses a feature outside the supported subset (joint type, protocol op).
struct UnsupportedError : Error {
  using Error::Error;
};

/// Structurally invalid data: broken invariants, disconnected trees, bad geometry.
struct StructureError : Error {
  using Error::Error;
};

/// A well-formed message is missing or violates a required field.
struct SchemaError : Error {
  using Error::Error;
};

/// Trajectory or setpoint cannot be realized. Carries the failing waypoint when known.
struct PlanningError : Error {
  explicit PlanningError(const std::string& what, int waypoint = -1)
      : Error(what), waypoint_index(waypoint) {}
  int waypoint_index;
};

/// Socket / WebSocket / bus failures.
struct TransportError : Error {
  using Error::Error;
};

/// File I/O failures. Message names the path and cause.
struct IoError : Error {
  using Error::Error;
};

}  // namespace twinlink
