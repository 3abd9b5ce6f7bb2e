#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "solphish/rules.hpp"

namespace solphish::rules {

inline constexpr std::string_view kDetectionSchema = "1";

class SchemaViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stable field order; one object per line in detections files.
nlohmann::ordered_json detection_to_json(const Detection& d);

/// Parses and checks the Detection invariants (non-empty precedence-ordered
/// types, victim != phisher, evidence for every type).
Detection detection_from_json(const nlohmann::json& j);

void write_detections(const std::filesystem::path& path, std::span<const Detection> detections);
std::vector<Detection> read_detections(const std::filesystem::path& path);

}  // namespace solphish::rules
