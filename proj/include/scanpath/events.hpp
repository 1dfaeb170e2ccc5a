#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scanpath/corpus.hpp"

namespace scanpath {

inline constexpr int kNumSaccadeTypes = 5;

/// Smallest modelled saccade magnitude in characters; shorter (including
/// zero-length) refixations are clamped to it.
inline constexpr double kAmplitudeFloor = 0.5;

struct Fixation {
  double position = 0.0;  // characters from line start
  double duration = 0.0;  // ms
};

struct Scanpath {
  std::string reader_id;
  std::string text_id;
  int line_id = 0;
  std::optional<std::string> label;
  std::vector<Fixation> fixations;
};

/// One saccade and the fixation it lands on. `type` is 1-based:
/// 1 backward refixation, 2 forward refixation, 3 next word, 4 forward skip,
/// 5 regression.
struct SaccadeEvent {
  int type = 0;
  double amplitude = 0.0;  // signed, |amplitude| >= kAmplitudeFloor
  double duration = 0.0;
  Eigen::VectorXd launch;  // features of the word fixated before the saccade
  Eigen::VectorXd land;    // features of the word fixated after it
};

/// Index of the word containing position q. Whitespace belongs to the
/// preceding word and positions before the first word to word 0.
/// Throws std::out_of_range for q < 0 or q >= line extent.
std::size_t word_at(const Line& line, double q);
std::size_t word_at(const Text& text, int line_id, double q);

int classify_saccade(const Line& line, double from, double to);
int classify_saccade(const Text& text, int line_id, double from, double to);

/// Signed amplitude to - from with magnitude clamped to kAmplitudeFloor.
/// Zero-length moves become +kAmplitudeFloor.
double clamp_amplitude(double raw);

/// One event per consecutive fixation pair. Returns an empty list for
/// scanpaths with fewer than two fixations.
std::vector<SaccadeEvent> extract_events(const Scanpath& scanpath, const Text& text,
                                         const TextFeatures& features);

Scanpath parse_scanpath(const nlohmann::json& j);
nlohmann::json to_json(const Scanpath& scanpath);

/// JSONL, one scanpath per line. Parse errors name the 0-based record.
std::vector<Scanpath> parse_scanpaths(std::string_view jsonl);
std::vector<Scanpath> load_scanpaths(const std::filesystem::path& path);
std::string scanpaths_to_jsonl(std::span<const Scanpath> scanpaths);

}  // namespace scanpath
