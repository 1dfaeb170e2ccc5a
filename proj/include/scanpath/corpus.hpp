#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace scanpath {

/// A token on a line. Spans are line-relative character offsets, [start, end).
struct Word {
  std::string token;
  int start = 0;
  int end = 0;
  std::optional<int> syllables;
  std::vector<std::string> flags;

  int length() const { return end - start; }
  bool has_flag(std::string_view name) const;
};

using Line = std::vector<Word>;

struct Text {
  std::string text_id;
  std::vector<Line> lines;

  /// One past the last character of the last word on the line.
  int line_extent(std::size_t line_id) const;
  std::size_t word_count() const;
};

/// Raised for malformed corpus/scanpath input; carries the offending
/// line and word index (-1 when not applicable).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line_index = -1, int word_index = -1);
  int line_index() const { return line_index_; }
  int word_index() const { return word_index_; }

 private:
  int line_index_;
  int word_index_;
};

/// Validates spans and fills in missing syllable counts.
Text parse_text(const nlohmann::json& j);
nlohmann::json to_json(const Text& text);

/// Reads one Text object from a file.
Text load_text(const std::filesystem::path& path);
/// Reads a file holding either one Text object or an array of them.
std::vector<Text> load_texts(const std::filesystem::path& path);
void save_texts(const std::filesystem::path& path, std::span<const Text> texts);

/// Syllable estimate: number of maximal vowel-group runs (a, e, i, o, u, y,
/// case-insensitive), at least 1.
int estimate_syllables(std::string_view token);

class FrequencyTable {
 public:
  explicit FrequencyTable(double total_tokens = 1e6, double floor_count = 1.0);

  void set_count(const std::string& token, double count);
  /// Occurrence count, or the floor for tokens missing from the table.
  double count(const std::string& token) const;
  double per_million(const std::string& token) const;

  double total() const { return total_; }
  double floor_count() const { return floor_; }
  std::size_t size() const { return counts_.size(); }
  const std::unordered_map<std::string, double>& counts() const { return counts_; }

  /// TSV: header "#total<TAB>N", then "token<TAB>count" rows.
  static FrequencyTable parse(std::string_view tsv, double floor_count = 1.0);
  static FrequencyTable load(const std::filesystem::path& path, double floor_count = 1.0);
  std::string to_tsv() const;

 private:
  double total_;
  double floor_;
  std::unordered_map<std::string, double> counts_;
};

/// Normalization statistics for the log-transformed corpus measures plus
/// the flag vocabulary that fixes the feature layout.
struct NormStats {
  std::vector<double> mean;    // log frequency, log length chars, log length syllables
  std::vector<double> stddev;
  std::vector<std::string> flags;

  std::vector<std::string> layout() const;
  std::size_t dimension() const { return 4 + flags.size(); }
};

nlohmann::json to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& j);

/// Per-line feature matrices of one text: rows are words, columns follow
/// the layout, column 0 is the constant bias.
struct TextFeatures {
  std::string text_id;
  std::vector<Eigen::MatrixXd> lines;
};

struct CorpusFeatures {
  std::vector<std::string> layout;
  std::map<std::string, TextFeatures> texts;
  NormStats stats;

  std::size_t dimension() const { return layout.size(); }
  const TextFeatures& at(const std::string& text_id) const;
};

/// Feature vectors [1, z(log freq per million), z(log chars), z(log syllables),
/// flags...] for every word. Without `norm`, statistics (population mean/std)
/// and the flag vocabulary are computed from `texts`; with it they are reused
/// verbatim. Zero-variance components are emitted as 0.
CorpusFeatures compute_features(std::span<const Text> texts, const FrequencyTable& freq,
                                const std::optional<NormStats>& norm = std::nullopt);

/// Restricts the features to the given columns; column 0 must be included.
CorpusFeatures select_columns(const CorpusFeatures& features, std::span<const int> columns);

}  // namespace scanpath
