#pragma once

#include "lspkit/inp_parser.hpp"
#include "lspkit/network.hpp"

#include <filesystem>
#include <string>

namespace testing {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(LSPKIT_DATA_DIR) / name; }

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(LSPKIT_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline lspkit::NetworkModel with_sensors(const std::string& inp, const std::string& sensors) {
  auto model = lspkit::load_inp(data(inp));
  lspkit::attach_sensors(model, lspkit::load_sensors(data(sensors)));
  return model;
}

// Reservoir at 100 m feeding one junction through one pipe.
inline const char* kSinglePipe = R"([JUNCTIONS]
J1 0 1
[RESERVOIRS]
R1 100
[PIPES]
P1 R1 J1 1000 300 130
[OPTIONS]
Units LPS
Headloss H-W
[END]
)";

} // namespace testing
