#pragma once

// Versioned text parameter files for trained transforms and forests. The layout is described
// in docs/parameter-files.md; doubles use shortest round-trip formatting, so a file read back
// reproduces the parameters bit for bit.

#include "nfcp/regressor.hpp"
#include "nfcp/transforms.hpp"

#include <string>

namespace nfcp {

inline constexpr const char* kParamsMagic = "nfcp-params";
inline constexpr int kParamsVersion = 1;

std::string serialize(const ConformityTransform& t);
std::string serialize(const ForestModel& forest);

/// Throws ParseError naming the offending line.
ConformityTransform parse_transform(const std::string& text);
ForestModel parse_forest(const std::string& text);

void save(const ConformityTransform& t, const std::string& path);
void save(const ForestModel& forest, const std::string& path);
ConformityTransform load_transform(const std::string& path);
ForestModel load_forest(const std::string& path);

}  // namespace nfcp
