#include "saeprobe/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace saeprobe::svg {

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
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

std::string num(double value) {
    if (std::abs(value) < 5e-3) value = 0.0;
    return fmt::format("{:.2f}", value);
}

std::string diverging_color(double value) {
    const double v = std::clamp(value, -1.0, 1.0);
    const auto channel = [](double t) { return static_cast<int>(std::lround(255.0 * t)); };
    int r, g, b;
    if (v >= 0.0) {
        r = 255;
        g = channel(1.0 - v);
        b = channel(1.0 - v);
    } else {
        r = channel(1.0 + v);
        g = channel(1.0 + v);
        b = 255;
    }
    return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

Document::Document(double width, double height) {
    body_ = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
        "font-family=\"sans-serif\">\n",
        num(width), num(height), num(width), num(height));
    body_ += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", num(width), num(height));
}

void Document::rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra) {
    body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"{}{}/>\n", num(x), num(y),
                         num(w), num(h), fill, extra.empty() ? "" : " ", extra);
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width) {
    body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>\n", num(x1),
                         num(y1), num(x2), num(y2), stroke, num(width));
}

void Document::text(double x, double y, std::string_view content, double size, std::string_view anchor,
                    std::string_view extra) {
    body_ += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{}\"{}{}>{}</text>\n", num(x), num(y),
                         num(size), anchor, extra.empty() ? "" : " ", extra, escape(content));
}

std::string Document::finish() { return body_ + "</svg>\n"; }

}  // namespace saeprobe::svg
