#include "scanpath/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "scanpath/hashing.hpp"

namespace scanpath {

using nlohmann::json;

bool Word::has_flag(std::string_view name) const {
  return std::find(flags.begin(), flags.end(), name) != flags.end();
}

int Text::line_extent(std::size_t line_id) const {
  if (line_id >= lines.size() || lines[line_id].empty()) return 0;
  return lines[line_id].back().end;
}

std::size_t Text::word_count() const {
  std::size_t n = 0;
  for (const auto& line : lines) n += line.size();
  return n;
}

ParseError::ParseError(const std::string& message, int line_index, int word_index)
    : std::runtime_error([&] {
        std::string where;
        if (line_index >= 0) where += " (line " + std::to_string(line_index);
        if (word_index >= 0) where += ", word " + std::to_string(word_index);
        if (line_index >= 0) where += ")";
        return message + where;
      }()),
      line_index_(line_index),
      word_index_(word_index) {}

int estimate_syllables(std::string_view token) {
  auto is_vowel = [](char c) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'a': case 'e': case 'i': case 'o': case 'u': case 'y':
        return true;
      default:
        return false;
    }
  };
  int groups = 0;
  bool in_group = false;
  for (char c : token) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  return std::max(groups, 1);
}

Text parse_text(const json& j) {
  if (!j.is_object()) throw ParseError("text must be a JSON object");
  Text text;
  try {
    text.text_id = j.at("text_id").get<std::string>();
  } catch (const json::exception&) {
    throw ParseError("missing or invalid \"text_id\"");
  }
  if (!j.contains("lines") || !j["lines"].is_array()) throw ParseError("missing \"lines\" array");
  const auto& lines = j["lines"];
  if (lines.empty()) throw ParseError("text has no lines");
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int l = static_cast<int>(li);
    if (!lines[li].is_array()) throw ParseError("line must be an array of words", l);
    if (lines[li].empty()) throw ParseError("empty line", l);
    Line line;
    for (std::size_t wi = 0; wi < lines[li].size(); ++wi) {
      const int w = static_cast<int>(wi);
      const auto& jw = lines[li][wi];
      Word word;
      try {
        word.token = jw.at("token").get<std::string>();
        word.start = jw.at("start").get<int>();
        word.end = jw.at("end").get<int>();
        if (jw.contains("syllables") && !jw["syllables"].is_null()) {
          word.syllables = jw["syllables"].get<int>();
        }
        if (jw.contains("flags")) word.flags = jw["flags"].get<std::vector<std::string>>();
      } catch (const json::exception& e) {
        throw ParseError(std::string("malformed word: ") + e.what(), l, w);
      }
      if (word.start < 0) throw ParseError("negative word start", l, w);
      if (word.start >= word.end) throw ParseError("empty or inverted word span", l, w);
      if (word.syllables && *word.syllables < 1) throw ParseError("syllable count must be >= 1", l, w);
      if (!line.empty()) {
        const Word& prev = line.back();
        if (word.start < prev.end && word.end > prev.start) {
          throw ParseError("overlapping word spans", l, w);
        }
        if (word.start < prev.start) throw ParseError("word spans not sorted", l, w);
      }
      if (!word.syllables) word.syllables = estimate_syllables(word.token);
      std::sort(word.flags.begin(), word.flags.end());
      line.push_back(std::move(word));
    }
    text.lines.push_back(std::move(line));
  }
  return text;
}

json to_json(const Text& text) {
  json lines = json::array();
  for (const auto& line : text.lines) {
    json jl = json::array();
    for (const auto& w : line) {
      json jw = {{"token", w.token}, {"start", w.start}, {"end", w.end}, {"flags", w.flags}};
      if (w.syllables) jw["syllables"] = *w.syllables;
      jl.push_back(std::move(jw));
    }
    lines.push_back(std::move(jl));
  }
  return {{"text_id", text.text_id}, {"lines", std::move(lines)}};
}

namespace {

json parse_json_file(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace

Text load_text(const std::filesystem::path& path) { return parse_text(parse_json_file(path)); }

std::vector<Text> load_texts(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  std::vector<Text> texts;
  if (j.is_array()) {
    for (const auto& item : j) texts.push_back(parse_text(item));
  } else {
    texts.push_back(parse_text(j));
  }
  std::set<std::string> ids;
  for (const auto& t : texts) {
    if (!ids.insert(t.text_id).second) throw ParseError("duplicate text_id " + t.text_id);
  }
  return texts;
}

void save_texts(const std::filesystem::path& path, std::span<const Text> texts) {
  json arr = json::array();
  for (const auto& t : texts) arr.push_back(to_json(t));
  write_file(path, arr.dump(1) + "\n");
}

FrequencyTable::FrequencyTable(double total_tokens, double floor_count)
    : total_(total_tokens), floor_(floor_count) {
  if (!(total_ > 0.0)) throw std::invalid_argument("frequency table total must be positive");
  if (!(floor_ > 0.0)) throw std::invalid_argument("frequency floor must be positive");
}

void FrequencyTable::set_count(const std::string& token, double count) {
  if (!(count >= 0.0)) throw std::invalid_argument("negative count for token " + token);
  counts_[token] = count;
}

double FrequencyTable::count(const std::string& token) const {
  auto it = counts_.find(token);
  if (it == counts_.end() || it->second <= 0.0) return floor_;
  return it->second;
}

double FrequencyTable::per_million(const std::string& token) const {
  return count(token) / total_ * 1e6;
}

FrequencyTable FrequencyTable::parse(std::string_view tsv, double floor_count) {
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::optional<FrequencyTable> table;
  int line_no = 0;
  auto parse_number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError("frequency table: bad number '" + s + "' on row " + std::to_string(line_no));
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("frequency table: missing tab on row " + std::to_string(line_no));
    }
    const std::string key = line.substr(0, tab);
    const double value = parse_number(line.substr(tab + 1));
    if (!table) {
      if (key != "#total") throw ParseError("frequency table: first row must be #total<TAB>N");
      table.emplace(value, floor_count);
      continue;
    }
    table->set_count(key, value);
  }
  if (!table) throw ParseError("frequency table: empty input");
  return *table;
}

FrequencyTable FrequencyTable::load(const std::filesystem::path& path, double floor_count) {
  return parse(read_file(path), floor_count);
}

std::string FrequencyTable::to_tsv() const {
  std::vector<std::pair<std::string, double>> rows(counts_.begin(), counts_.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::ostringstream out;
  out.precision(17);
  out << "#total\t" << total_ << "\n";
  for (const auto& [token, count] : rows) out << token << "\t" << count << "\n";
  return out.str();
}

std::vector<std::string> NormStats::layout() const {
  std::vector<std::string> names = {"bias", "log_frequency", "log_length_chars",
                                    "log_length_syllables"};
  for (const auto& f : flags) names.push_back("flag:" + f);
  return names;
}

json to_json(const NormStats& stats) {
  return {{"mean", stats.mean}, {"stddev", stats.stddev}, {"flags", stats.flags}};
}

NormStats norm_stats_from_json(const json& j) {
  NormStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  s.flags = j.at("flags").get<std::vector<std::string>>();
  if (s.mean.size() != 3 || s.stddev.size() != 3) {
    throw ParseError("normalization stats must have 3 means and 3 stddevs");
  }
  return s;
}

const TextFeatures& CorpusFeatures::at(const std::string& text_id) const {
  auto it = texts.find(text_id);
  if (it == texts.end()) throw std::out_of_range("no features for text " + text_id);
  return it->second;
}

namespace {

constexpr int kNumMeasures = 3;

std::array<double, kNumMeasures> raw_measures(const Word& w, const FrequencyTable& freq) {
  return {std::log(freq.per_million(w.token)), std::log(static_cast<double>(w.length())),
          std::log(static_cast<double>(w.syllables.value_or(estimate_syllables(w.token))))};
}

}  // namespace

CorpusFeatures compute_features(std::span<const Text> texts, const FrequencyTable& freq,
                                const std::optional<NormStats>& norm) {
  NormStats stats;
  if (norm) {
    stats = *norm;
  } else {
    std::set<std::string> flags;
    std::array<double, kNumMeasures> sum{};
    std::size_t n = 0;
    for (const auto& text : texts) {
      for (const auto& line : text.lines) {
        for (const auto& w : line) {
          flags.insert(w.flags.begin(), w.flags.end());
          const auto m = raw_measures(w, freq);
          for (int k = 0; k < kNumMeasures; ++k) sum[k] += m[k];
          ++n;
        }
      }
    }
    stats.flags.assign(flags.begin(), flags.end());
    stats.mean.assign(kNumMeasures, 0.0);
    stats.stddev.assign(kNumMeasures, 0.0);
    if (n > 0) {
      for (int k = 0; k < kNumMeasures; ++k) stats.mean[k] = sum[k] / static_cast<double>(n);
      std::array<double, kNumMeasures> ss{};
      for (const auto& text : texts) {
        for (const auto& line : text.lines) {
          for (const auto& w : line) {
            const auto m = raw_measures(w, freq);
            for (int k = 0; k < kNumMeasures; ++k) {
              const double dev = m[k] - stats.mean[k];
              ss[k] += dev * dev;
            }
          }
        }
      }
      for (int k = 0; k < kNumMeasures; ++k) {
        stats.stddev[k] = std::sqrt(ss[k] / static_cast<double>(n));
      }
    }
  }

  CorpusFeatures out;
  out.layout = stats.layout();
  const auto dim = static_cast<Eigen::Index>(stats.dimension());
  for (const auto& text : texts) {
    TextFeatures tf;
    tf.text_id = text.text_id;
    for (const auto& line : text.lines) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(line.size()), dim);
      for (std::size_t wi = 0; wi < line.size(); ++wi) {
        const auto r = static_cast<Eigen::Index>(wi);
        const Word& w = line[wi];
        m(r, 0) = 1.0;
        const auto raw = raw_measures(w, freq);
        for (int k = 0; k < kNumMeasures; ++k) {
          // Treat spreads at rounding level as constant columns.
          const bool constant = !(stats.stddev[k] > 1e-12 * std::max(1.0, std::abs(stats.mean[k])));
          m(r, 1 + k) = constant ? 0.0 : (raw[k] - stats.mean[k]) / stats.stddev[k];
        }
        for (std::size_t f = 0; f < stats.flags.size(); ++f) {
          m(r, static_cast<Eigen::Index>(4 + f)) = w.has_flag(stats.flags[f]) ? 1.0 : 0.0;
        }
      }
      tf.lines.push_back(std::move(m));
    }
    out.texts.emplace(text.text_id, std::move(tf));
  }
  out.stats = std::move(stats);
  return out;
}

CorpusFeatures select_columns(const CorpusFeatures& features, std::span<const int> columns) {
  if (columns.empty() || columns.front() != 0) {
    throw std::invalid_argument("feature selection must start with the bias column 0");
  }
  const auto dim = static_cast<int>(features.dimension());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] < 0 || columns[i] >= dim || (i > 0 && columns[i] <= columns[i - 1])) {
      throw std::invalid_argument("feature selection columns must be ascending and in range");
    }
  }
  CorpusFeatures out;
  out.stats = features.stats;
  for (int c : columns) out.layout.push_back(features.layout[static_cast<std::size_t>(c)]);
  for (const auto& [id, tf] : features.texts) {
    TextFeatures sel;
    sel.text_id = id;
    for (const auto& m : tf.lines) {
      Eigen::MatrixXd s(m.rows(), static_cast<Eigen::Index>(columns.size()));
      for (std::size_t k = 0; k < columns.size(); ++k) {
        s.col(static_cast<Eigen::Index>(k)) = m.col(columns[k]);
      }
      sel.lines.push_back(std::move(s));
    }
    out.texts.emplace(id, std::move(sel));
  }
  return out;
}

}  // namespace scanpath
