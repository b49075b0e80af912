#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bokeh/image.hpp"

namespace bokeh {

enum class FocusRegion { Foreground, Middle, Background, AtDisparity };

/// Structured bokeh control; the parse target of prompts.
struct BokehControl {
  FocusRegion focus = FocusRegion::Foreground;
  double disparity = 0.0;  // meaningful only for AtDisparity
  double intensity = 30.0;

  void validate() const;
  friend bool operator==(const BokehControl& a, const BokehControl& b) {
    if (a.focus != b.focus || a.intensity != b.intensity) return false;
    return a.focus != FocusRegion::AtDisparity || a.disparity == b.disparity;
  }
};

inline constexpr double kDefaultIntensity = 30.0;

/// Parse failure with the byte offset of the offending token.
class PromptError : public std::runtime_error {
 public:
  PromptError(const std::string& message, std::size_t position)
      : std::runtime_error(message), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Grammar (case-insensitive, whitespace-separated):
///
///   prompt    := focus [intensity] END
///   focus     := "focus" "on" "the" region | "focus" "at" "disparity" NUMBER
///   region    := "foreground" | "middle" | "background"
///   intensity := "with" "blur" "intensity" "of" NUMBER
///
/// Missing intensity defaults to 30.
BokehControl parse_prompt(std::string_view text);

/// Canonical lowercase prompt; numbers use shortest round-trip form.
std::string format_prompt(const BokehControl& control);

std::string_view region_name(FocusRegion focus);

struct FocusPercentiles {
  double foreground = 0.90;
  double middle = 0.50;
  double background = 0.10;
};

/// Lower nearest-rank quantile: sorted[floor(q * (n - 1))].
double disparity_quantile(const DisparityMap& disp, double q);

double resolve_focus(const BokehControl& control, const DisparityMap& disp,
                     const FocusPercentiles& percentiles = {});

/// Deterministic stand-in for a text encoder: two tokens of width `dim`.
///
/// Token 0 (focus): one-hot code over the four focus variants in slots 0..3;
/// AtDisparity also fills the remaining slots with sinusoidal features of the
/// disparity. Token 1 (intensity): dim/2 sin/cos pairs of the intensity.
struct ControlEmbedding {
  int dim = 0;
  std::array<std::vector<double>, 2> tokens;

  static constexpr int kTokenCount = 2;
  static constexpr int kCodeSlots = 4;
};

ControlEmbedding embed_control(const BokehControl& control, int dim);

/// sin/cos pairs of `value` at geometric frequencies 1 / base^(k / pairs).
std::vector<double> sinusoidal_features(double value, int pairs, double base);

}  // namespace bokeh
