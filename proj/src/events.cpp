#include "scanpath/events.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "scanpath/hashing.hpp"

namespace scanpath {

using nlohmann::json;

std::size_t word_at(const Line& line, double q) {
  if (line.empty()) throw std::out_of_range("word_at: empty line");
  if (!(q >= 0.0) || q >= static_cast<double>(line.back().end)) {
    throw std::out_of_range("word_at: position " + std::to_string(q) + " outside line extent [0, " +
                            std::to_string(line.back().end) + ")");
  }
  auto it = std::upper_bound(line.begin(), line.end(), q,
                             [](double pos, const Word& w) { return pos < w.start; });
  if (it == line.begin()) return 0;
  return static_cast<std::size_t>(std::distance(line.begin(), it) - 1);
}

std::size_t word_at(const Text& text, int line_id, double q) {
  if (line_id < 0 || static_cast<std::size_t>(line_id) >= text.lines.size()) {
    throw std::out_of_range("word_at: line " + std::to_string(line_id) + " not in text " +
                            text.text_id);
  }
  return word_at(text.lines[static_cast<std::size_t>(line_id)], q);
}

int classify_saccade(const Line& line, double from, double to) {
  const auto wf = word_at(line, from);
  const auto wt = word_at(line, to);
  if (wt == wf) return to < from ? 1 : 2;
  if (wt == wf + 1) return 3;
  if (wt > wf) return 4;
  return 5;
}

int classify_saccade(const Text& text, int line_id, double from, double to) {
  if (line_id < 0 || static_cast<std::size_t>(line_id) >= text.lines.size()) {
    throw std::out_of_range("classify_saccade: bad line id");
  }
  return classify_saccade(text.lines[static_cast<std::size_t>(line_id)], from, to);
}

double clamp_amplitude(double raw) {
  if (std::abs(raw) >= kAmplitudeFloor) return raw;
  return raw < 0.0 ? -kAmplitudeFloor : kAmplitudeFloor;
}

std::vector<SaccadeEvent> extract_events(const Scanpath& scanpath, const Text& text,
                                         const TextFeatures& features) {
  std::vector<SaccadeEvent> events;
  const auto& fx = scanpath.fixations;
  if (fx.size() < 2) {
    std::cerr << "warning: scanpath " << scanpath.reader_id << "/" << scanpath.text_id << "/"
              << scanpath.line_id << " has fewer than 2 fixations; no events\n";
    return events;
  }
  if (scanpath.line_id < 0 || static_cast<std::size_t>(scanpath.line_id) >= text.lines.size() ||
      static_cast<std::size_t>(scanpath.line_id) >= features.lines.size()) {
    throw std::out_of_range("extract_events: line " + std::to_string(scanpath.line_id) +
                            " not in text " + text.text_id);
  }
  const Line& line = text.lines[static_cast<std::size_t>(scanpath.line_id)];
  const Eigen::MatrixXd& feats = features.lines[static_cast<std::size_t>(scanpath.line_id)];
  events.reserve(fx.size() - 1);
  std::size_t from_word = word_at(line, fx[0].position);
  for (std::size_t t = 0; t + 1 < fx.size(); ++t) {
    const double q0 = fx[t].position;
    const double q1 = fx[t + 1].position;
    if (!(fx[t + 1].duration > 0.0)) {
      throw std::invalid_argument("extract_events: non-positive fixation duration");
    }
    const std::size_t to_word = word_at(line, q1);
    SaccadeEvent e;
    if (to_word == from_word) {
      e.type = q1 < q0 ? 1 : 2;
    } else if (to_word == from_word + 1) {
      e.type = 3;
    } else if (to_word > from_word) {
      e.type = 4;
    } else {
      e.type = 5;
    }
    e.amplitude = clamp_amplitude(q1 - q0);
    e.duration = fx[t + 1].duration;
    e.launch = feats.row(static_cast<Eigen::Index>(from_word)).transpose();
    e.land = feats.row(static_cast<Eigen::Index>(to_word)).transpose();
    events.push_back(std::move(e));
    from_word = to_word;
  }
  return events;
}

Scanpath parse_scanpath(const json& j) {
  Scanpath s;
  try {
    s.reader_id = j.at("reader_id").get<std::string>();
    s.text_id = j.at("text_id").get<std::string>();
    s.line_id = j.at("line_id").get<int>();
    if (j.contains("label") && !j["label"].is_null()) {
      const auto& l = j["label"];
      s.label = l.is_string() ? l.get<std::string>() : l.dump();
    }
    for (const auto& f : j.at("fixations")) {
      if (!f.is_array() || f.size() != 2) throw ParseError("fixation must be [q, d]");
      s.fixations.push_back({f[0].get<double>(), f[1].get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scanpath: ") + e.what());
  }
  for (const auto& f : s.fixations) {
    if (!(f.duration > 0.0)) throw ParseError("fixation durations must be positive");
    if (!(f.position >= 0.0)) throw ParseError("fixation positions must be non-negative");
  }
  return s;
}

json to_json(const Scanpath& s) {
  json fx = json::array();
  for (const auto& f : s.fixations) fx.push_back({f.position, f.duration});
  json j = {{"reader_id", s.reader_id}, {"text_id", s.text_id}, {"line_id", s.line_id}};
  if (s.label) j["label"] = *s.label;
  j["fixations"] = std::move(fx);
  return j;
}

std::vector<Scanpath> parse_scanpaths(std::string_view jsonl) {
  std::vector<Scanpath> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_scanpath(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError("scanpath record " + std::to_string(record) + ": malformed JSON: " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("scanpath record " + std::to_string(record) + ": " + e.what());
    }
    ++record;
  }
  return out;
}

std::vector<Scanpath> load_scanpaths(const std::filesystem::path& path) {
  return parse_scanpaths(read_file(path));
}

std::string scanpaths_to_jsonl(std::span<const Scanpath> scanpaths) {
  std::string out;
  for (const auto& s : scanpaths) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

}  // namespace scanpath
