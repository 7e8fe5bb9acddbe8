#include "apga/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "apga/baselines.hpp"
#include "apga/harness/experiment.hpp"
#include "apga/io/csv.hpp"
#include "apga/io/image_io.hpp"
#include "apga/trainer/trainer.hpp"

namespace apga::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kW = 640, kH = 360;
constexpr double kLeft = 64, kRight = 12, kTop = 28, kBottom = 42;

std::string fmt(double v) { return io::format_double(v); }

}  // namespace

std::string render_svg_chart(const std::string& title, const std::vector<Series>& series) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool have = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!have) {
        xmin = xmax = x;
        ymin = ymax = y;
        have = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1;  // degenerate single-point charts stay valid
  if (ymax <= ymin) ymax = ymin + 1;
  const double px = (kW - kLeft - kRight) / (xmax - xmin);
  const double py = (kH - kTop - kBottom) / (ymax - ymin);
  auto sx = [&](double x) { return kLeft + (x - xmin) * px; };
  auto sy = [&](double y) { return kH - kBottom - (y - ymin) * py; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft << "\" y=\"18\" font-family=\"monospace\" font-size=\"13\">"
     << title << "</text>\n";
  // axes
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
     << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    os << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << kH - kBottom + 16
       << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">" << fmt(xv)
       << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(sy(yv) + 3)
       << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" << fmt(yv)
       << "</text>\n";
  }
  double legend_x = kLeft + 8;
  for (const auto& s : series) {
    if (!s.points.empty()) {
      std::ostringstream pts;
      for (const auto& [x, y] : s.points) pts << fmt(sx(x)) << ',' << fmt(sy(y)) << ' ';
      if (s.points.size() > 1)
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\""
           << pts.str() << "\"/>\n";
      for (const auto& [x, y] : s.points)
        if (s.points.size() <= 2)
          os << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y))
             << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    }
    os << "<text x=\"" << fmt(legend_x) << "\" y=\"" << kTop - 4
       << "\" font-family=\"monospace\" font-size=\"11\" fill=\"" << s.color << "\">" << s.label
       << "</text>\n";
    legend_x += 12.0 * (static_cast<double>(s.label.size()) + 2.0);
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> plot_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const std::string metrics = (dir / "metrics.csv").string();
  io::CsvTable t = io::read_csv(metrics);
  if (t.rows.empty()) throw io_error("metrics CSV has no data rows: " + metrics);

  auto column = [&](const char* name) {
    const int c = t.column(name);
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : t.rows) {
      const std::string& cell = row[static_cast<std::size_t>(c)];
      if (cell.empty()) continue;
      pts.emplace_back(io::parse_double(row[0]), io::parse_double(cell));
    }
    return pts;
  };

  std::vector<std::string> written;
  auto emit = [&](const std::string& file, const std::string& title,
                  std::vector<Series> series) {
    bool any = false;
    for (const auto& s : series) any = any || !s.points.empty();
    if (!any) return;
    std::ofstream os(dir / file);
    os << render_svg_chart(title, series);
    written.push_back((dir / file).string());
  };

  emit("losses.svg", "classification loss vs step",
       {{"L_original", "#1f77b4", column("L_original")},
        {"L_adversarial", "#d62728", column("L_adversarial")}});
  emit("reward.svg", "adversarial reward vs step",
       {{"R_t", "#2ca02c", column("R_t")}, {"b_t", "#9467bd", column("b_t")}});
  emit("policy.svg", "policy statistics vs step",
       {{"mean_policy_prob", "#1f77b4", column("mean_policy_prob")},
        {"aid_keep_fraction", "#ff7f0e", column("aid_keep_fraction")}});
  emit("accuracy.svg", "validation accuracy vs step",
       {{"val_accuracy", "#2ca02c", column("val_accuracy")}});
  return written;
}

namespace {

void blit(io::GrayImage& canvas, const float* cell, Index h, Index w, int row, int col) {
  const int y0 = row * (static_cast<int>(h) + 2) + 2;
  const int x0 = col * (static_cast<int>(w) + 2) + 2;
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const float v = std::min(1.0f, std::max(0.0f, cell[y * w + x]));
      canvas.pixels[static_cast<std::size_t>((y0 + y) * canvas.width + x0 + x)] =
          static_cast<std::uint16_t>(std::lround(v * 255.0f));
    }
}

}  // namespace

std::string export_mask_gallery(const std::string& run_dir, int columns) {
  const fs::path dir(run_dir);
  const ExperimentConfig cfg = load_config_file((dir / "config.json").string());
  const std::string ckpt = (dir / "checkpoint_final.apga").string();
  auto records = load_records(ckpt);

  data::Dataset<float> dataset;
  if (cfg.dataset.type == DatasetSource::Type::synthetic)
    dataset = data::generate<float>(cfg.dataset.synthetic);
  else
    dataset = data::load_folder<float>(cfg.dataset.folder_path, cfg.dataset.height,
                                       cfg.dataset.width);
  const auto& split = dataset.val.size() > 0 ? dataset.val : dataset.train;
  const Index n = std::min<Index>(columns, split.size());

  nn::PolicyModel<float> policy(0);
  for (auto& p : policy.params()) load_tensor_into(records, p.name, *p.value);
  const auto classes = u64_from_record(find_record(records, "meta/num_classes"))[0];
  nn::ClassifierModel<float> classifier(static_cast<int>(classes), 0);
  for (auto& p : classifier.params()) load_tensor_into(records, p.name, *p.value);

  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  ImageBatch<float> batch = data::gather_batch(split, idx);
  const MaskBatch<float> aid = aiding_mask(policy.forward(batch));
  const MaskBatch<float> cam = gradcam_mask(classifier, batch);

  const Index h = dataset.height, w = dataset.width, hw = h * w;
  io::GrayImage canvas;
  canvas.width = static_cast<int>(n) * (static_cast<int>(w) + 2) + 2;
  canvas.height = 3 * (static_cast<int>(h) + 2) + 2;
  canvas.bit_depth = 8;
  canvas.pixels.assign(static_cast<std::size_t>(canvas.width) * canvas.height, 255);

  fs::create_directories(dir / "masks");
  std::vector<std::uint8_t> pgm(static_cast<std::size_t>(hw));
  for (Index i = 0; i < n; ++i) {
    blit(canvas, batch.images.data() + i * hw, h, w, 0, static_cast<int>(i));
    blit(canvas, aid.values.data() + i * hw, h, w, 1, static_cast<int>(i));
    blit(canvas, cam.values.data() + i * hw, h, w, 2, static_cast<int>(i));
    for (Index p = 0; p < hw; ++p)
      pgm[static_cast<std::size_t>(p)] = aid.values[i * hw + p] != 0.0f ? 255 : 0;
    io::write_pgm((dir / "masks" / ("aid_" + std::to_string(i) + ".pgm")).string(),
                  static_cast<int>(w), static_cast<int>(h), pgm);
  }
  const std::string out = (dir / "mask_gallery.png").string();
  io::write_png_gray(out, canvas);
  return out;
}

}  // namespace apga::harness
