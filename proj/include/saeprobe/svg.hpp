#ifndef SAEPROBE_SVG_HPP
#define SAEPROBE_SVG_HPP

#include <string>
#include <string_view>

namespace saeprobe::svg {

std::string escape(std::string_view text);

/// Fixed-precision coordinate formatting so output is byte-stable.
std::string num(double value);

/// Diverging blue-white-red color for a value in [-1, 1].
std::string diverging_color(double value);

/// Minimal document builder.
class Document {
public:
    Document(double width, double height);
    void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {});
    void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0);
    void text(double x, double y, std::string_view content, double size = 12.0, std::string_view anchor = "start",
              std::string_view extra = {});
    std::string finish();

private:
    std::string body_;
};

}  // namespace saeprobe::svg

#endif  // SAEPROBE_SVG_HPP
