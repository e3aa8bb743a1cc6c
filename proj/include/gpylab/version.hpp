#pragma once

namespace gpylab {
inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kReportSchema = "gpylab-report-v1";
inline constexpr const char* kConfigSchema = "gpylab-config-v1";
}  // namespace gpylab
