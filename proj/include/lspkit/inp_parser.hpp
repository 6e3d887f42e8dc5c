#pragma once

#include "lspkit/network.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lspkit {

struct Diagnostic {
  std::string code;
  std::string message;
  std::string location; // "line 12" or an element reference such as "pipe 'P3'"
  std::size_t line = 0; // 1-based; 0 when no source line applies
};

struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;

  bool ok() const { return errors.empty(); }
  bool has_error(std::string_view code) const;
  bool has_warning(std::string_view code) const;
  /// One diagnostic per line, errors first.
  std::string to_string() const;
};

/// Either a validated model or the report explaining why there is none.
/// `report` is always filled; it carries warnings on success.
struct ParseResult {
  std::optional<NetworkModel> model;
  ValidationReport report;

  bool ok() const { return model.has_value(); }
};

/// Parses the supported subset of the EPANET INP format (LPS flow units, metric).
///
/// Supported sections: TITLE JUNCTIONS RESERVOIRS TANKS PIPES PUMPS VALVES DEMANDS
/// PATTERNS CURVES TIMES COORDINATES OPTIONS. Any other section is skipped with an
/// UNSUPPORTED_SECTION warning. Pumps must reference a single-point head curve and
/// valves must be PRVs.
ParseResult parse_inp(std::string_view text);

/// Reads and parses a file; throws Error with the first error code on failure.
NetworkModel load_inp(const std::filesystem::path& path);

/// Writes the model back as INP text that parses to an identical model.
std::string to_inp(const NetworkModel& model);

/// Checks every structural invariant of a model. Locations name elements rather
/// than source lines.
ValidationReport validate(const NetworkModel& model);

/// Parses a sensors sidecar document: {"sensors": ["id", ...]}.
std::vector<std::string> parse_sensors_json(std::string_view text);
std::vector<std::string> load_sensors(const std::filesystem::path& path);
std::string sensors_to_json(const std::vector<std::string>& sensors);

/// Installs a sensor list on the model. Throws Error{"BAD_SENSOR"} unless the ids
/// are distinct junction ids.
void attach_sensors(NetworkModel& model, std::vector<std::string> sensors);

/// Reads a whole file into a string; throws Error{"IO_ERROR"}.
std::string read_text_file(const std::filesystem::path& path);

} // namespace lspkit
