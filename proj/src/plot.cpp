#include "latentmark/evalx/plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "latentmark/core/check.hpp"
#include "latentmark/matching/matching.hpp"

namespace latentmark::evalx {

namespace {

constexpr int kW = 720, kH = 420;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

struct SvgDoc {
    std::ostringstream os;
    SvgDoc() {
        os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
           << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
        os << "<rect width='100%' height='100%' fill='white'/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 12, const std::string& anchor = "middle",
              const std::string& fill = "#333") {
        os << "<text x='" << x << "' y='" << y << "' font-size='" << size
           << "' font-family='sans-serif' text-anchor='" << anchor << "' fill='" << fill << "'>" << esc(s)
           << "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#888",
              double width = 1) {
        os << "<line x1='" << x1 << "' y1='" << y1 << "' x2='" << x2 << "' y2='" << y2 << "' stroke='"
           << stroke << "' stroke-width='" << width << "'/>\n";
    }
    void save(const std::string& path) {
        os << "</svg>\n";
        std::ofstream f(path);
        if (!f) throw IoError("cannot write plot: " + path);
        f << os.str();
    }
};

}  // namespace

void plot_lines(const std::string& out_path, const std::string& title, const std::string& x_label,
                const std::string& y_label, const std::vector<Series>& series, bool log_y) {
    check(!series.empty(), "plot_lines: no series");
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series)
        for (size_t i = 0; i < s.xs.size(); ++i) {
            const double y = log_y ? std::log10(std::max(1e-300, s.ys[i])) : s.ys[i];
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const double px0 = kMarginL, px1 = kW - kMarginR, py0 = kH - kMarginB, py1 = kMarginT;
    auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
    auto sy = [&](double y) {
        const double v = log_y ? std::log10(std::max(1e-300, y)) : y;
        return py0 + (v - ymin) / (ymax - ymin) * (py1 - py0);
    };

    SvgDoc doc;
    doc.text(kW / 2.0, 22, title, 15);
    doc.line(px0, py0, px1, py0);
    doc.line(px0, py0, px0, py1);
    for (int t = 0; t <= 5; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 5.0;
        doc.line(sx(fx), py0, sx(fx), py0 + 4);
        std::ostringstream lbl;
        lbl.precision(4);
        lbl << fx;
        doc.text(sx(fx), py0 + 18, lbl.str(), 11);
        const double fy = ymin + (ymax - ymin) * t / 5.0;
        const double yy = py0 + (fy - ymin) / (ymax - ymin) * (py1 - py0);
        doc.line(px0 - 4, yy, px0, yy);
        std::ostringstream ylbl;
        ylbl.precision(3);
        if (log_y) ylbl << "1e" << fy;
        else ylbl << fy;
        doc.text(px0 - 8, yy + 4, ylbl.str(), 11, "end");
    }
    doc.text(kW / 2.0, kH - 12, x_label, 12);
    doc.text(16, kH / 2.0, y_label, 12);
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        std::ostringstream pts;
        for (size_t i = 0; i < s.xs.size(); ++i) pts << sx(s.xs[i]) << "," << sy(s.ys[i]) << " ";
        doc.os << "<polyline points='" << pts.str() << "' fill='none' stroke='" << kColors[si % 6]
               << "' stroke-width='1.5'/>\n";
        doc.text(px1 - 6, py1 + 16 + 16 * static_cast<double>(si), s.label, 12, "end", kColors[si % 6]);
    }
    doc.save(out_path);
}

void plot_bars(const std::string& out_path, const std::string& title,
               const std::vector<std::pair<std::string, double>>& bars, double y_max) {
    check(!bars.empty(), "plot_bars: no bars");
    const double px0 = kMarginL, px1 = kW - kMarginR, py0 = kH - kMarginB - 30, py1 = kMarginT;
    SvgDoc doc;
    doc.text(kW / 2.0, 22, title, 15);
    doc.line(px0, py0, px1, py0);
    doc.line(px0, py0, px0, py1);
    for (int t = 0; t <= 5; ++t) {
        const double fy = y_max * t / 5.0;
        const double yy = py0 + fy / y_max * (py1 - py0);
        doc.line(px0 - 4, yy, px0, yy);
        std::ostringstream lbl;
        lbl.precision(2);
        lbl << fy;
        doc.text(px0 - 8, yy + 4, lbl.str(), 11, "end");
    }
    const double slot = (px1 - px0) / static_cast<double>(bars.size());
    for (size_t i = 0; i < bars.size(); ++i) {
        const double x = px0 + slot * (static_cast<double>(i) + 0.2);
        const double h = std::clamp(bars[i].second / y_max, 0.0, 1.0) * (py0 - py1);
        doc.os << "<rect x='" << x << "' y='" << py0 - h << "' width='" << slot * 0.6 << "' height='" << h
               << "' fill='" << kColors[0] << "'/>\n";
        std::ostringstream v;
        v.precision(3);
        v << bars[i].second;
        doc.text(x + slot * 0.3, py0 - h - 5, v.str(), 10);
        doc.os << "<text x='" << x + slot * 0.3 << "' y='" << py0 + 12
               << "' font-size='10' font-family='sans-serif' text-anchor='end' fill='#333' transform='rotate(-35 "
               << x + slot * 0.3 << " " << py0 + 12 << ")'>" << esc(bars[i].first) << "</text>\n";
    }
    doc.save(out_path);
}

void plot_metrics_log(const std::string& metrics_jsonl, const std::string& out_path) {
    std::ifstream f(metrics_jsonl);
    if (!f) throw IoError("cannot open metrics log: " + metrics_jsonl);
    Series total{"l_total", {}, {}}, ext{"l_ext", {}, {}}, acc{"bit_acc", {}, {}};
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        const double step = j.at("step").get<double>();
        total.xs.push_back(step);
        total.ys.push_back(j.at("l_total").get<double>());
        ext.xs.push_back(step);
        ext.ys.push_back(j.at("l_ext").get<double>());
        acc.xs.push_back(step);
        acc.ys.push_back(j.at("bit_acc").get<double>());
    }
    plot_lines(out_path, "training losses and bit accuracy", "step", "value", {total, ext, acc});
}

void plot_eval_table(const std::string& table_tsv, const std::string& out_path) {
    std::ifstream f(table_tsv);
    if (!f) throw IoError("cannot open eval table: " + table_tsv);
    std::vector<std::pair<std::string, double>> bars;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string name, acc;
        std::getline(ss, name, '\t');
        std::getline(ss, acc, '\t');
        bars.emplace_back(name, std::stod(acc));
    }
    plot_bars(out_path, "bit accuracy per attack", bars, 1.0);
}

void plot_fpr_curve(int k, const std::string& out_path) {
    Series s{"FPR_det", {}, {}};
    for (int n = 0; n <= k; ++n) {
        const double p = matching::fpr_detection(n, k);
        if (p <= 0) break;
        s.xs.push_back(n);
        s.ys.push_back(p);
    }
    plot_lines(out_path, "detection FPR vs matching threshold (k=" + std::to_string(k) + ")", "n",
               "FPR_det", {s}, /*log_y=*/true);
}

}  // namespace latentmark::evalx
