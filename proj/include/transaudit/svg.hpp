#pragma once

// Minimal deterministic SVG writer. Coordinates are printed with exactly
// three decimals and -0 is normalised, so identical input gives identical bytes.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace transaudit::svg {

/// "%.3f" with -0.000 printed as 0.000.
std::string num(double v);
std::string escape(std::string_view text);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  [[nodiscard]] std::string hex() const;
  bool operator==(const Rgb&) const = default;
};

/// Piecewise-linear colour scale over anchor positions in [0, 1].
class ColorScale {
 public:
  ColorScale() = default;
  explicit ColorScale(std::vector<std::pair<double, Rgb>> anchors);

  /// Sequential white-to-blue scale.
  static const ColorScale& sequential();
  /// Blue-white-red scale with white at 0.5.
  static const ColorScale& diverging();
  /// `{"anchors": [[0.0, "#ffffff"], [1.0, "#08306b"]]}`
  static ColorScale from_json(const nlohmann::json& j);

  /// t is clamped to [0, 1].
  [[nodiscard]] Rgb at(double t) const;

 private:
  std::vector<std::pair<double, Rgb>> anchors_;
};

Rgb parse_hex(std::string_view hex);

using Attrs = std::vector<std::pair<std::string, std::string>>;

class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, const Attrs& attrs = {});
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
            const Attrs& attrs = {});
  void circle(double cx, double cy, double r, std::string_view fill, const Attrs& attrs = {});
  void text(double x, double y, std::string_view content, const Attrs& attrs = {});
  void open_group(const Attrs& attrs);
  void close_group();

  [[nodiscard]] std::string str() const;

 private:
  double width_;
  double height_;
  std::string body_;
  int depth_ = 1;
};

}  // namespace transaudit::svg
