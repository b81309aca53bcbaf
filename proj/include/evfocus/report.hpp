#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evfocus/io.hpp"
#include "evfocus/metrics.hpp"

namespace evfocus {

/// Collects (prediction, truth) pairs from several maps so they can be
/// scored as one set.
class MetricPool {
public:
  void add(const Image& pred, const Image& truth, const Grid<std::uint8_t>* pred_valid = nullptr) {
    if (pred.width() != truth.width() || pred.height() != truth.height()) {
      throw std::invalid_argument("prediction and truth shapes differ");
    }
    for (int y = 0; y < pred.height(); ++y) {
      for (int x = 0; x < pred.width(); ++x) {
        if (pred_valid && !(*pred_valid)(x, y)) continue;
        pred_.push_back(pred(x, y));
        truth_.push_back(truth(x, y));
      }
    }
  }

  [[nodiscard]] MetricReport evaluate(double max_depth) const {
    const int n = static_cast<int>(pred_.size());
    Image p(n, 1), g(n, 1);
    std::copy(pred_.begin(), pred_.end(), p.data().begin());
    std::copy(truth_.begin(), truth_.end(), g.data().begin());
    return evfocus::evaluate(p, g, max_depth);
  }

private:
  std::vector<double> pred_;
  std::vector<double> truth_;
};

inline io::Json report_to_json(const MetricReport& r) {
  // NaN cutoffs become null.
  auto num = [](double v) { return std::isfinite(v) ? io::Json(v) : io::Json(nullptr); };
  return {{"abs_rel", r.abs_rel},   {"sq_rel", r.sq_rel},       {"rmse", r.rmse},
          {"rmse_log", r.rmse_log}, {"delta1", r.delta1},       {"delta2", r.delta2},
          {"delta3", r.delta3},     {"cutoff_10m", num(r.cutoff_10m)}, {"cutoff_20m", num(r.cutoff_20m)},
          {"cutoff_30m", num(r.cutoff_30m)}, {"epe", r.epe},    {"pixels", r.pixels},
          {"nonpositive", r.nonpositive}};
}

struct TableColumn {
  const char* header;
  double MetricReport::*field;
};

/// Full metric set in the order of the main comparison table.
inline const std::vector<TableColumn>& full_columns() {
  static const std::vector<TableColumn> cols = {
      {"Abs.Rel", &MetricReport::abs_rel}, {"Sq.Rel", &MetricReport::sq_rel},
      {"RMSE", &MetricReport::rmse},       {"RMSE log", &MetricReport::rmse_log},
      {"d<1.25", &MetricReport::delta1},   {"d<1.25^2", &MetricReport::delta2},
      {"d<1.25^3", &MetricReport::delta3}, {"10m", &MetricReport::cutoff_10m},
      {"20m", &MetricReport::cutoff_20m},  {"30m", &MetricReport::cutoff_30m},
      {"EPE", &MetricReport::epe}};
  return cols;
}

/// Metric set of the velocity-noise ablation table.
inline const std::vector<TableColumn>& noise_columns() {
  static const std::vector<TableColumn> cols = {
      {"Abs.Rel", &MetricReport::abs_rel}, {"Sq.Rel", &MetricReport::sq_rel},
      {"RMSE", &MetricReport::rmse},       {"d<1.25^2", &MetricReport::delta2},
      {"20m", &MetricReport::cutoff_20m},  {"EPE", &MetricReport::epe}};
  return cols;
}

/// Aligned text table, one row per labelled report.
inline std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows,
                                const std::vector<TableColumn>& cols, const char* label_header) {
  std::size_t label_width = std::string(label_header).size();
  for (const auto& row : rows) label_width = std::max(label_width, row.first.size());
  std::string out;
  char buf[64];
  out += std::string(label_header) + std::string(label_width - std::string(label_header).size(), ' ');
  for (const TableColumn& c : cols) {
    std::snprintf(buf, sizeof buf, "  %10s", c.header);
    out += buf;
  }
  out += '\n';
  for (const auto& [label, r] : rows) {
    out += label + std::string(label_width - label.size(), ' ');
    for (const TableColumn& c : cols) {
      const double v = r.*(c.field);
      if (std::isfinite(v)) {
        std::snprintf(buf, sizeof buf, "  %10.4f", v);
      } else {
        std::snprintf(buf, sizeof buf, "  %10s", "-");
      }
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace evfocus
