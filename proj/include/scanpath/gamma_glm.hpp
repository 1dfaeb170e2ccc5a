#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scanpath/corpus.hpp"
#include "scanpath/events.hpp"
#include "scanpath/random.hpp"

namespace scanpath {

inline constexpr double kLinkMin = 1e-8;
inline constexpr double kLinkMax = 1e8;

struct GammaSpec {
  double shape = 1.0;
  double scale = 1.0;
};

/// exp(weights . w), clamped to [kLinkMin, kLinkMax].
double link(const Eigen::Ref<const Eigen::VectorXd>& weights,
            const Eigen::Ref<const Eigen::VectorXd>& w);

/// Log density of Gamma(shape, scale) at x > 0.
double gamma_logpdf(double x, GammaSpec spec);

/// Regression weights for one saccade type.
struct TypeWeights {
  Eigen::VectorXd amp_shape;  // alpha_u
  Eigen::VectorXd amp_scale;  // beta_u
  Eigen::VectorXd dur_shape;  // gamma_u
  Eigen::VectorXd dur_scale;  // delta_u
};

struct ModelParams {
  std::array<double, kNumSaccadeTypes> pi{};
  std::array<TypeWeights, kNumSaccadeTypes> types;
  std::vector<std::string> layout;

  /// Uniform pi and zero weights of length m.
  static ModelParams zeros(int m, std::vector<std::string> layout = {});

  int dimension() const { return static_cast<int>(types[0].amp_shape.size()); }
  const TypeWeights& of(int type) const { return types.at(static_cast<std::size_t>(type - 1)); }
  TypeWeights& of(int type) { return types.at(static_cast<std::size_t>(type - 1)); }

  GammaSpec amplitude_spec(int type, const Eigen::Ref<const Eigen::VectorXd>& w) const;
  GammaSpec duration_spec(int type, const Eigen::Ref<const Eigen::VectorXd>& w) const;

  /// Throws std::invalid_argument unless pi is a probability vector
  /// (sum within 1e-12) and all weight vectors are finite with equal length.
  void validate() const;
};

nlohmann::json to_json(const ModelParams& params);
ModelParams model_params_from_json(const nlohmann::json& j);

double event_loglik(const SaccadeEvent& e, const ModelParams& params);

/// Log-likelihood split into saccade-type, amplitude and duration terms.
struct LoglikParts {
  double type = 0.0;
  double amplitude = 0.0;
  double duration = 0.0;
  double total() const { return type + amplitude + duration; }
};

LoglikParts loglik_parts(std::span<const SaccadeEvent> events, const ModelParams& params);
double sequence_loglik(std::span<const SaccadeEvent> events, const ModelParams& params);

/// The (type, amplitude, duration) triple the sampler drew for one step.
struct SaccadeDraw {
  int type = 0;
  double amplitude = 0.0;
  double duration = 0.0;
};

struct SampledScanpath {
  Scanpath scanpath;
  std::vector<SaccadeDraw> draws;
};

/// Samples a per-line scanpath of `length` fixations starting at `start`.
///
/// Each step draws a type from pi, then an amplitude from the type's gamma
/// (launch-word features) restricted to landing positions on this line that
/// realise the drawn type, then a duration from the type's duration gamma
/// (landing-word features). Types whose landing region is empty or carries
/// negligible mass at the current position are redrawn. The recorded draws
/// are exactly what extract_events recovers from the emitted fixations.
SampledScanpath sample_scanpath(const ModelParams& params, const Text& text, int line_id,
                                const TextFeatures& features, Fixation start, int length,
                                std::uint64_t seed);

}  // namespace scanpath
