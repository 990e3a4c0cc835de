#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace covnet {

inline constexpr double kFieldLength = 120.0;
inline constexpr double kFieldWidth = 53.3;
inline constexpr double kFrameRateHz = 10.0;
inline constexpr int kPreSnapFrames = 30;
// Normalized x of a team's own goal line (end zone depth).
inline constexpr double kGoalLineX = 10.0;

enum class PositionCode { QB, RB, WR, TE, OL, DL, LB, CB, S };
inline constexpr int kNumPositionCodes = 9;
inline constexpr std::array<std::string_view, kNumPositionCodes> kPositionNames = {
    "QB", "RB", "WR", "TE", "OL", "DL", "LB", "CB", "S"};

enum class Scheme { Cover1, Cover2, Cover3, Cover4, Cover6, Man, Prevent };
inline constexpr int kNumSchemes = 7;
inline constexpr std::array<std::string_view, kNumSchemes> kSchemeNames = {
    "COVER_1", "COVER_2", "COVER_3", "COVER_4", "COVER_6", "MAN", "PREVENT"};

// Individual coverage assignments. Landmarks are zone anchor points relative to the line of
// scrimmage (depth beyond LOS, field y) on the normalized field; left = high y.
enum class Coverage {
  NoAssignment,
  Man,
  Bracket,
  FlatLeft,
  FlatRight,
  CurlFlatLeft,
  CurlFlatRight,
  HookCurlLeft,
  HookCurlRight,
  HookMiddle,
  DeepHalfLeft,
  DeepHalfRight,
  DeepMiddle,
  DeepThirdLeft,
  DeepThirdRight,
  QuarterOutsideLeft,
  QuarterInsideLeft,
  QuarterInsideRight,
  QuarterOutsideRight,
  PreventDeep,
};
inline constexpr int kNumCoverageClasses = 20;

struct CoverageInfo {
  std::string_view name;
  bool is_man;
  bool is_zone;
  double landmark_depth;
  double landmark_y;
};

inline constexpr std::array<CoverageInfo, kNumCoverageClasses> kCoverageVocabulary = {{
    {"NO_ASSIGNMENT", false, false, 0.0, 0.0},
    {"MAN", true, false, 0.0, 0.0},
    {"BRACKET", true, false, 0.0, 0.0},
    {"FLAT_LEFT", false, true, 3.0, 46.0},
    {"FLAT_RIGHT", false, true, 3.0, 7.3},
    {"CURL_FLAT_LEFT", false, true, 7.0, 41.0},
    {"CURL_FLAT_RIGHT", false, true, 7.0, 12.3},
    {"HOOK_CURL_LEFT", false, true, 8.0, 33.5},
    {"HOOK_CURL_RIGHT", false, true, 8.0, 19.8},
    {"HOOK_MIDDLE", false, true, 8.5, 26.65},
    {"DEEP_HALF_LEFT", false, true, 18.0, 39.5},
    {"DEEP_HALF_RIGHT", false, true, 18.0, 13.8},
    {"DEEP_MIDDLE", false, true, 20.0, 26.65},
    {"DEEP_THIRD_LEFT", false, true, 17.0, 44.0},
    {"DEEP_THIRD_RIGHT", false, true, 17.0, 9.3},
    {"QUARTER_OUTSIDE_LEFT", false, true, 15.0, 46.0},
    {"QUARTER_INSIDE_LEFT", false, true, 15.0, 33.0},
    {"QUARTER_INSIDE_RIGHT", false, true, 15.0, 20.3},
    {"QUARTER_OUTSIDE_RIGHT", false, true, 15.0, 7.3},
    {"PREVENT_DEEP", false, true, 28.0, 26.65},
}};

inline const CoverageInfo& coverage_info(Coverage c) { return kCoverageVocabulary[static_cast<int>(c)]; }
inline bool is_man_coverage(Coverage c) { return coverage_info(c).is_man; }
inline bool is_man_coverage(int c) { return kCoverageVocabulary.at(static_cast<std::size_t>(c)).is_man; }

template <std::size_t N>
std::optional<int> lookup_name(const std::array<std::string_view, N>& names, std::string_view name) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

inline std::optional<int> coverage_from_name(std::string_view name) {
  for (int i = 0; i < kNumCoverageClasses; ++i)
    if (kCoverageVocabulary[static_cast<std::size_t>(i)].name == name) return i;
  return std::nullopt;
}

inline std::string_view coverage_name(int c) { return kCoverageVocabulary.at(static_cast<std::size_t>(c)).name; }
inline std::string_view scheme_name(Scheme s) { return kSchemeNames[static_cast<std::size_t>(s)]; }
inline std::string_view position_name(PositionCode p) { return kPositionNames[static_cast<std::size_t>(p)]; }

}  // namespace covnet
