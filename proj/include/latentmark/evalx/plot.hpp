#pragma once

#include <string>
#include <vector>

namespace latentmark::evalx {

struct Series {
    std::string label;
    std::vector<double> xs, ys;
};

// minimal static SVG charts (batch operators read files, no interactive UI)
void plot_lines(const std::string& out_path, const std::string& title, const std::string& x_label,
                const std::string& y_label, const std::vector<Series>& series, bool log_y = false);

void plot_bars(const std::string& out_path, const std::string& title,
               const std::vector<std::pair<std::string, double>>& bars, double y_max = 1.0);

// convenience wrappers over the standard artifact files
void plot_metrics_log(const std::string& metrics_jsonl, const std::string& out_path);
void plot_eval_table(const std::string& table_tsv, const std::string& out_path);
void plot_fpr_curve(int k, const std::string& out_path);

}  // namespace latentmark::evalx
