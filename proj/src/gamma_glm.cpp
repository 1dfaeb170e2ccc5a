#include "scanpath/gamma_glm.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scanpath/special.hpp"

namespace scanpath {

using nlohmann::json;

double link(const Eigen::Ref<const Eigen::VectorXd>& weights,
            const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (weights.size() != w.size()) {
    throw std::invalid_argument("link: weight/feature length mismatch (" +
                                std::to_string(weights.size()) + " vs " +
                                std::to_string(w.size()) + ")");
  }
  return std::clamp(std::exp(weights.dot(w)), kLinkMin, kLinkMax);
}

double gamma_logpdf(double x, GammaSpec spec) {
  if (!(x > 0.0)) throw std::domain_error("gamma_logpdf: x must be positive");
  return (spec.shape - 1.0) * std::log(x) - x / spec.scale - log_gamma(spec.shape) -
         spec.shape * std::log(spec.scale);
}

ModelParams ModelParams::zeros(int m, std::vector<std::string> layout) {
  if (m < 1) throw std::invalid_argument("ModelParams: feature dimension must be >= 1");
  ModelParams p;
  p.pi.fill(1.0 / kNumSaccadeTypes);
  for (auto& t : p.types) {
    t.amp_shape = Eigen::VectorXd::Zero(m);
    t.amp_scale = Eigen::VectorXd::Zero(m);
    t.dur_shape = Eigen::VectorXd::Zero(m);
    t.dur_scale = Eigen::VectorXd::Zero(m);
  }
  p.layout = std::move(layout);
  return p;
}

GammaSpec ModelParams::amplitude_spec(int type, const Eigen::Ref<const Eigen::VectorXd>& w) const {
  const auto& t = of(type);
  return {link(t.amp_shape, w), link(t.amp_scale, w)};
}

GammaSpec ModelParams::duration_spec(int type, const Eigen::Ref<const Eigen::VectorXd>& w) const {
  const auto& t = of(type);
  return {link(t.dur_shape, w), link(t.dur_scale, w)};
}

void ModelParams::validate() const {
  double sum = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("pi entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("pi must sum to 1");
  const auto m = dimension();
  if (m < 1) throw std::invalid_argument("weight vectors must be non-empty");
  for (const auto& t : types) {
    for (const Eigen::VectorXd* v : {&t.amp_shape, &t.amp_scale, &t.dur_shape, &t.dur_scale}) {
      if (v->size() != m) throw std::invalid_argument("weight vectors must all have length M");
      if (!v->allFinite()) throw std::invalid_argument("weight vectors must be finite");
    }
  }
  if (!layout.empty() && static_cast<int>(layout.size()) != m) {
    throw std::invalid_argument("feature layout length differs from M");
  }
}

namespace {

json weights_json(const ModelParams& p, Eigen::VectorXd TypeWeights::*member) {
  json rows = json::array();
  for (const auto& t : p.types) {
    const Eigen::VectorXd& v = t.*member;
    rows.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  return rows;
}

void read_weights(const json& rows, ModelParams& p, Eigen::VectorXd TypeWeights::*member, int m,
                  const char* name) {
  if (!rows.is_array() || rows.size() != kNumSaccadeTypes) {
    throw ParseError(std::string("model: \"") + name + "\" must have 5 rows");
  }
  for (std::size_t u = 0; u < kNumSaccadeTypes; ++u) {
    const auto v = rows[u].get<std::vector<double>>();
    if (static_cast<int>(v.size()) != m) {
      throw ParseError(std::string("model: \"") + name + "\" row length differs from M");
    }
    p.types[u].*member = Eigen::Map<const Eigen::VectorXd>(v.data(), m);
  }
}

}  // namespace

json to_json(const ModelParams& p) {
  return {{"M", p.dimension()},
          {"feature_layout", p.layout},
          {"pi", p.pi},
          {"alpha", weights_json(p, &TypeWeights::amp_shape)},
          {"beta", weights_json(p, &TypeWeights::amp_scale)},
          {"gamma", weights_json(p, &TypeWeights::dur_shape)},
          {"delta", weights_json(p, &TypeWeights::dur_scale)}};
}

ModelParams model_params_from_json(const json& j) {
  try {
    const int m = j.at("M").get<int>();
    ModelParams p = ModelParams::zeros(m);
    if (j.contains("feature_layout")) p.layout = j["feature_layout"].get<std::vector<std::string>>();
    const auto pi = j.at("pi").get<std::vector<double>>();
    if (pi.size() != kNumSaccadeTypes) throw ParseError("model: pi must have 5 entries");
    std::copy(pi.begin(), pi.end(), p.pi.begin());
    read_weights(j.at("alpha"), p, &TypeWeights::amp_shape, m, "alpha");
    read_weights(j.at("beta"), p, &TypeWeights::amp_scale, m, "beta");
    read_weights(j.at("gamma"), p, &TypeWeights::dur_shape, m, "gamma");
    read_weights(j.at("delta"), p, &TypeWeights::dur_scale, m, "delta");
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
}

double event_loglik(const SaccadeEvent& e, const ModelParams& params) {
  return std::log(params.pi[static_cast<std::size_t>(e.type - 1)]) +
         gamma_logpdf(std::abs(e.amplitude), params.amplitude_spec(e.type, e.launch)) +
         gamma_logpdf(e.duration, params.duration_spec(e.type, e.land));
}

LoglikParts loglik_parts(std::span<const SaccadeEvent> events, const ModelParams& params) {
  LoglikParts parts;
  for (const auto& e : events) {
    parts.type += std::log(params.pi[static_cast<std::size_t>(e.type - 1)]);
  }
  for (const auto& e : events) {
    parts.amplitude += gamma_logpdf(std::abs(e.amplitude), params.amplitude_spec(e.type, e.launch));
  }
  for (const auto& e : events) {
    parts.duration += gamma_logpdf(e.duration, params.duration_spec(e.type, e.land));
  }
  return parts;
}

double sequence_loglik(std::span<const SaccadeEvent> events, const ModelParams& params) {
  double total = 0.0;
  for (const auto& e : events) total += event_loglik(e, params);
  return total;
}

namespace {

// Character range [lo, hi) of positions that word_at maps to word i.
struct Territory {
  double lo;
  double hi;
};

Territory territory(const Line& line, std::size_t i) {
  const double lo = i == 0 ? 0.0 : static_cast<double>(line[i].start);
  const double hi = i + 1 < line.size() ? static_cast<double>(line[i + 1].start)
                                        : static_cast<double>(line.back().end);
  return {lo, hi};
}

// Magnitude interval [lo, hi] of amplitudes whose landing position realises
// `type` from position q on word i; empty when lo >= hi.
std::pair<double, double> amplitude_range(const Line& line, std::size_t i, double q, int type) {
  const double extent = static_cast<double>(line.back().end);
  const Territory here = territory(line, i);
  switch (type) {
    case 1:
      return {kAmplitudeFloor, q - here.lo};
    case 2:
      return {kAmplitudeFloor, here.hi - q};
    case 3: {
      if (i + 1 >= line.size()) return {0.0, 0.0};
      const Territory next = territory(line, i + 1);
      return {std::max(kAmplitudeFloor, next.lo - q), next.hi - q};
    }
    case 4: {
      if (i + 2 >= line.size()) return {0.0, 0.0};
      const Territory skip = territory(line, i + 2);
      return {std::max(kAmplitudeFloor, skip.lo - q), extent - q};
    }
    case 5:
      if (i == 0) return {0.0, 0.0};
      return {std::max(kAmplitudeFloor, q - here.lo), q};
    default:
      throw std::invalid_argument("bad saccade type");
  }
}

// Draws from Gamma(spec) restricted to [lo, hi] by inverting the CDF, using
// the upper-tail representation when the interval sits in the right tail.
// Returns NaN when the interval carries less than 1e-12 probability.
double sample_truncated_gamma(Rng& rng, GammaSpec spec, double lo, double hi) {
  namespace bm = boost::math;
  const double a = spec.shape;
  const double xlo = lo / spec.scale;
  const double xhi = hi / spec.scale;
  const double plo = bm::gamma_p(a, xlo);
  if (plo < 0.5) {
    const double phi = bm::gamma_p(a, xhi);
    const double mass = phi - plo;
    if (!(mass > 1e-12)) return std::numeric_limits<double>::quiet_NaN();
    const double p = plo + uniform01(rng) * mass;
    return bm::gamma_p_inv(a, p) * spec.scale;
  }
  const double qlo = bm::gamma_q(a, xlo);
  const double qhi = bm::gamma_q(a, xhi);
  const double mass = qlo - qhi;
  if (!(mass > 1e-12)) return std::numeric_limits<double>::quiet_NaN();
  const double qv = qhi + uniform01(rng) * mass;
  if (!(qv > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return bm::gamma_q_inv(a, qv) * spec.scale;
}

}  // namespace

SampledScanpath sample_scanpath(const ModelParams& params, const Text& text, int line_id,
                                const TextFeatures& features, Fixation start, int length,
                                std::uint64_t seed) {
  if (length < 2) throw std::invalid_argument("sample_scanpath: length must be >= 2");
  if (line_id < 0 || static_cast<std::size_t>(line_id) >= text.lines.size()) {
    throw std::out_of_range("sample_scanpath: bad line id");
  }
  const Line& line = text.lines[static_cast<std::size_t>(line_id)];
  const Eigen::MatrixXd& feats = features.lines.at(static_cast<std::size_t>(line_id));
  if (feats.cols() != params.dimension()) {
    throw std::invalid_argument("sample_scanpath: feature dimension differs from model M");
  }
  if (!(start.duration > 0.0)) throw std::invalid_argument("sample_scanpath: start duration");
  word_at(line, start.position);

  Rng rng(seed);
  SampledScanpath out;
  out.scanpath.text_id = text.text_id;
  out.scanpath.line_id = line_id;
  out.scanpath.fixations.push_back(start);
  double q = start.position;
  constexpr int kMaxAttempts = 10000;
  for (int t = 1; t < length; ++t) {
    const std::size_t word = word_at(line, q);
    const Eigen::VectorXd launch = feats.row(static_cast<Eigen::Index>(word)).transpose();
    SaccadeDraw draw;
    double next_q = q;
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      const int type = static_cast<int>(sample_discrete(rng, params.pi)) + 1;
      const auto [lo, hi] = amplitude_range(line, word, q, type);
      if (!(hi > lo)) continue;
      const double magnitude = sample_truncated_gamma(rng, params.amplitude_spec(type, launch), lo, hi);
      if (!std::isfinite(magnitude)) continue;
      const double sign = (type == 1 || type == 5) ? -1.0 : 1.0;
      const double candidate = q + sign * magnitude;
      if (!(candidate >= 0.0) || candidate >= static_cast<double>(line.back().end)) continue;
      const double recorded = candidate - q;
      // Boundary round-off can still move the landing point; re-check.
      if (std::abs(recorded) < kAmplitudeFloor || classify_saccade(line, q, candidate) != type) {
        continue;
      }
      draw.type = type;
      draw.amplitude = recorded;
      next_q = candidate;
      accepted = true;
    }
    if (!accepted) {
      throw std::runtime_error("sample_scanpath: no feasible saccade from position " +
                               std::to_string(q));
    }
    const std::size_t landing = word_at(line, next_q);
    const Eigen::VectorXd land = feats.row(static_cast<Eigen::Index>(landing)).transpose();
    const GammaSpec dur = params.duration_spec(draw.type, land);
    double d = 0.0;
    do {
      d = sample_gamma(rng, dur.shape, dur.scale);
    } while (!(d > 0.0));
    draw.duration = d;
    out.scanpath.fixations.push_back({next_q, d});
    out.draws.push_back(draw);
    q = next_q;
  }
  return out;
}

}  // namespace scanpath
