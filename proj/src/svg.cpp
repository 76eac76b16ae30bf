#include "latefusion/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "latefusion/csv.hpp"

namespace latefusion::svg {

namespace {

constexpr double kWidth = 480, kHeight = 400;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

std::string num(double v) { return csv::format_g6(v); }

std::string text_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
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

void open(std::ostringstream& o, const std::string& title)
{
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
      << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << text_escape(title)
      << "</text>\n";
}

struct Frame {
    double x0, x1, y0, y1;  // data ranges
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void axes(std::ostringstream& o, const Frame& f, const std::string& xlabel, const std::string& ylabel, int ticks)
{
    o << "<g stroke=\"black\" fill=\"none\">\n";
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kHeight - kBottom) << "\" x2=\"" << num(kWidth - kRight)
      << "\" y2=\"" << num(kHeight - kBottom) << "\"/>\n";
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kHeight - kBottom) << "\"/>\n";
    o << "</g>\n";
    for (int i = 0; i <= ticks; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / ticks;
        const double yv = f.y0 + (f.y1 - f.y0) * i / ticks;
        o << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(kHeight - kBottom + 16)
          << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
          << "</text>\n";
    }
    o << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 12)
      << "\" text-anchor=\"middle\">" << text_escape(xlabel) << "</text>\n";
    o << "<text x=\"16\" y=\"" << num((kTop + kHeight - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((kTop + kHeight - kBottom) / 2) << ")\">" << text_escape(ylabel) << "</text>\n";
}

}  // namespace

std::string roc_plot(const RocCurve& curve, double auc_value, const std::string& title)
{
    std::ostringstream o;
    open(o, title);
    const Frame f{0, 1, 0, 1};
    axes(o, f, "False positive rate", "True positive rate", 5);
    o << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(1)) << "\" y2=\""
      << num(f.py(1)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    o << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (i) o << ' ';
        o << num(f.px(curve.points[i].fpr)) << ',' << num(f.py(curve.points[i].tpr));
    }
    o << "\"/>\n";
    o << "<rect x=\"" << num(kWidth - kRight - 130) << "\" y=\"" << num(kHeight - kBottom - 34)
      << "\" width=\"120\" height=\"24\" fill=\"white\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << num(kWidth - kRight - 124) << "\" y1=\"" << num(kHeight - kBottom - 22) << "\" x2=\""
      << num(kWidth - kRight - 104) << "\" y2=\"" << num(kHeight - kBottom - 22)
      << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(kWidth - kRight - 98) << "\" y=\"" << num(kHeight - kBottom - 18) << "\">AUC = "
      << num(auc_value) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string elbow_plot(const FeatureRanking& ranking, std::size_t selected_count, const std::string& title)
{
    std::ostringstream o;
    open(o, title);
    double lo = 0.0, hi = 0.0;
    for (const auto& [name, s] : ranking) {
        if (std::isfinite(s)) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
    }
    if (hi == lo) hi = lo + 1.0;
    const double k = static_cast<double>(std::max<std::size_t>(ranking.size(), 2));
    const Frame f{1, k, lo, hi};
    axes(o, f, "Feature rank", "Score", 4);
    o << "<polyline fill=\"none\" stroke=\"gray\" points=\"";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (i) o << ' ';
        const double s = std::isfinite(ranking[i].second) ? ranking[i].second : hi;
        o << num(f.px(static_cast<double>(i + 1))) << ',' << num(f.py(s));
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const double s = std::isfinite(ranking[i].second) ? ranking[i].second : hi;
        o << "<circle cx=\"" << num(f.px(static_cast<double>(i + 1))) << "\" cy=\"" << num(f.py(s)) << "\" r=\"3\" fill=\""
          << (i < selected_count ? "#d62728" : "#7f7f7f") << "\"><title>" << text_escape(ranking[i].first)
          << "</title></circle>\n";
    }
    if (selected_count > 0 && selected_count < ranking.size()) {
        const double x = f.px(static_cast<double>(selected_count) + 0.5);
        o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x) << "\" y2=\""
          << num(kHeight - kBottom) << "\" stroke=\"#d62728\" stroke-dasharray=\"5 3\"/>\n";
        o << "<text x=\"" << num(x + 4) << "\" y=\"" << num(kTop + 12) << "\">cut after " << selected_count << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string confusion_plot(const Confusion& c, const std::string& title)
{
    std::ostringstream o;
    open(o, title);
    const double counts[2][2] = {{static_cast<double>(c.tp), static_cast<double>(c.fn)},
                                 {static_cast<double>(c.fp), static_cast<double>(c.tn)}};
    const double row_total[2] = {counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]};
    const char* names[2] = {"Malignant", "Benign"};
    const double x0 = 140, y0 = 70, cell = 130;
    for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 2; ++col) {
            const double share = row_total[r] > 0 ? counts[r][col] / row_total[r] : 0.0;
            const int shade = static_cast<int>(std::lround(255.0 - 200.0 * share));
            o << "<rect x=\"" << num(x0 + col * cell) << "\" y=\"" << num(y0 + r * cell) << "\" width=\"" << num(cell)
              << "\" height=\"" << num(cell) << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\" stroke=\"black\"/>\n";
            o << "<text x=\"" << num(x0 + col * cell + cell / 2) << "\" y=\"" << num(y0 + r * cell + cell / 2)
              << "\" text-anchor=\"middle\" font-size=\"18\">" << num(counts[r][col]) << "</text>\n";
            o << "<text x=\"" << num(x0 + col * cell + cell / 2) << "\" y=\"" << num(y0 + r * cell + cell / 2 + 20)
              << "\" text-anchor=\"middle\">" << num(share) << "</text>\n";
        }
        o << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(y0 + r * cell + cell / 2) << "\" text-anchor=\"end\">"
          << names[r] << "</text>\n";
        o << "<text x=\"" << num(x0 + r * cell + cell / 2) << "\" y=\"" << num(y0 - 8) << "\" text-anchor=\"middle\">"
          << names[r] << "</text>\n";
    }
    o << "<text x=\"" << num(x0 + cell) << "\" y=\"" << num(y0 + 2 * cell + 30) << "\" text-anchor=\"middle\">Predicted</text>\n";
    o << "<text x=\"30\" y=\"" << num(y0 + cell) << "\" text-anchor=\"middle\" transform=\"rotate(-90 30 "
      << num(y0 + cell) << ")\">Actual</text>\n";
    o << "</svg>\n";
    return o.str();
}

}  // namespace latefusion::svg
