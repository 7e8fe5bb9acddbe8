#pragma once

#include <string>
#include <utility>
#include <vector>

namespace apga::harness {

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

/// Deterministic SVG line chart; identical inputs produce identical bytes.
std::string render_svg_chart(const std::string& title, const std::vector<Series>& series);

/// Charts for one run directory's metrics.csv: losses, reward/baseline,
/// policy statistics and validation accuracy. Returns the files written.
std::vector<std::string> plot_run(const std::string& run_dir);

/// PNG gallery of validation samples: input row, aiding-mask row, saliency
/// (Grad-CAM) mask row. Also dumps the individual masks as PGM files.
std::string export_mask_gallery(const std::string& run_dir, int columns = 6);

}  // namespace apga::harness
