#include "transaudit/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "transaudit/error.hpp"

namespace transaudit::svg {

namespace {

std::string attrs_str(const Attrs& attrs) {
  std::string out;
  for (const auto& [k, v] : attrs) out += fmt::format(" {}=\"{}\"", k, escape(v));
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string num(double v) {
  auto s = fmt::format("{:.3f}", v);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Rgb::hex() const { return fmt::format("#{:02x}{:02x}{:02x}", r, g, b); }

Rgb parse_hex(std::string_view hex) {
  if (hex.size() != 7 || hex[0] != '#') throw Error(ErrorKind::ConfigError, "colour must look like #rrggbb");
  std::array<int, 6> d{};
  for (std::size_t i = 0; i < 6; ++i) {
    d[i] = hex_digit(hex[i + 1]);
    if (d[i] < 0) throw Error(ErrorKind::ConfigError, "bad hex digit in colour " + std::string(hex));
  }
  return {static_cast<std::uint8_t>(d[0] * 16 + d[1]), static_cast<std::uint8_t>(d[2] * 16 + d[3]),
          static_cast<std::uint8_t>(d[4] * 16 + d[5])};
}

ColorScale::ColorScale(std::vector<std::pair<double, Rgb>> anchors) : anchors_(std::move(anchors)) {
  if (anchors_.size() < 2) throw Error(ErrorKind::ConfigError, "a colour scale needs at least two anchors");
  std::sort(anchors_.begin(), anchors_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

const ColorScale& ColorScale::sequential() {
  static const ColorScale s({{0.0, parse_hex("#f7fbff")}, {0.5, parse_hex("#6baed6")}, {1.0, parse_hex("#08306b")}});
  return s;
}

const ColorScale& ColorScale::diverging() {
  static const ColorScale s({{0.0, parse_hex("#2166ac")}, {0.5, parse_hex("#f7f7f7")}, {1.0, parse_hex("#b2182b")}});
  return s;
}

ColorScale ColorScale::from_json(const nlohmann::json& j) {
  std::vector<std::pair<double, Rgb>> anchors;
  for (const auto& a : j.at("anchors")) anchors.emplace_back(a.at(0).get<double>(), parse_hex(a.at(1).get<std::string>()));
  return ColorScale(std::move(anchors));
}

Rgb ColorScale::at(double t) const {
  if (std::isnan(t)) t = 0.5;
  t = std::clamp(t, anchors_.front().first, anchors_.back().first);
  for (std::size_t i = 1; i < anchors_.size(); ++i) {
    const auto& [t1, c1] = anchors_[i];
    const auto& [t0, c0] = anchors_[i - 1];
    if (t > t1) continue;
    const double f = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
    auto mix = [f](std::uint8_t a, std::uint8_t b) {
      return static_cast<std::uint8_t>(std::lround(a + f * (static_cast<double>(b) - a)));
    };
    return {mix(c0.r, c1.r), mix(c0.g, c1.g), mix(c0.b, c1.b)};
  }
  return anchors_.back().second;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, std::string_view fill, const Attrs& attrs) {
  body_ += std::string(2 * depth_, ' ') +
           fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"{}/>\n", num(x), num(y),
                       num(std::max(w, 0.0)), num(std::max(h, 0.0)), fill, attrs_str(attrs));
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
                    const Attrs& attrs) {
  body_ += std::string(2 * depth_, ' ') +
           fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                       num(x1), num(y1), num(x2), num(y2), stroke, num(width), attrs_str(attrs));
}

void Document::circle(double cx, double cy, double r, std::string_view fill, const Attrs& attrs) {
  body_ += std::string(2 * depth_, ' ') + fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"{}/>\n",
                                                      num(cx), num(cy), num(r), fill, attrs_str(attrs));
}

void Document::text(double x, double y, std::string_view content, const Attrs& attrs) {
  body_ += std::string(2 * depth_, ' ') +
           fmt::format("<text x=\"{}\" y=\"{}\"{}>{}</text>\n", num(x), num(y), attrs_str(attrs), escape(content));
}

void Document::open_group(const Attrs& attrs) {
  body_ += std::string(2 * depth_, ' ') + fmt::format("<g{}>\n", attrs_str(attrs));
  ++depth_;
}

void Document::close_group() {
  if (depth_ <= 1) return;
  --depth_;
  body_ += std::string(2 * depth_, ' ') + "</g>\n";
}

std::string Document::str() const {
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"DejaVu Sans, Arial, sans-serif\" font-size=\"11\">\n",
      num(width_), num(height_));
  out += "  <rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += body_;
  for (int d = depth_; d > 1; --d) out += std::string(2 * (d - 1), ' ') + "</g>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace transaudit::svg
