#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "apga/data/dataset.hpp"
#include "apga/data/synthetic.hpp"
#include "apga/io/csv.hpp"
#include "apga/io/image_io.hpp"

// On-disk dataset layout:
//   images/*.png   8- or 16-bit grayscale
//   labels.csv     filename,label[,split]
//   roi/*.png      optional binary ground-truth masks
//   spec.json      generation parameters, synthetic sets only
// Rows without a split are assigned train/val/test 60/25/15 by filename hash
// with largest-remainder rounding.

namespace apga::data {

namespace fs = std::filesystem;

/// Bilinear resample of a single-channel row-major image.
template <typename Scalar>
std::vector<Scalar> bilinear_resize(const std::vector<Scalar>& src, Index sh, Index sw, Index dh,
                                    Index dw) {
  std::vector<Scalar> dst(static_cast<std::size_t>(dh * dw));
  if (sh == dh && sw == dw) {
    std::copy(src.begin(), src.end(), dst.begin());
    return dst;
  }
  const double sy = static_cast<double>(sh) / static_cast<double>(dh);
  const double sx = static_cast<double>(sw) / static_cast<double>(dw);
  for (Index y = 0; y < dh; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    const Index y0 = std::clamp(static_cast<Index>(std::floor(fy)), Index(0), sh - 1);
    const Index y1 = std::min(y0 + 1, sh - 1);
    const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
    for (Index x = 0; x < dw; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      const Index x0 = std::clamp(static_cast<Index>(std::floor(fx)), Index(0), sw - 1);
      const Index x1 = std::min(x0 + 1, sw - 1);
      const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
      const double top = static_cast<double>(src[y0 * sw + x0]) * (1.0 - wx) +
                         static_cast<double>(src[y0 * sw + x1]) * wx;
      const double bot = static_cast<double>(src[y1 * sw + x0]) * (1.0 - wx) +
                         static_cast<double>(src[y1 * sw + x1]) * wx;
      dst[static_cast<std::size_t>(y * dw + x)] =
          static_cast<Scalar>(top * (1.0 - wy) + bot * wy);
    }
  }
  return dst;
}

template <typename Scalar>
void write_split_files(const Split<Scalar>& split, const std::string& split_name,
                       const fs::path& dir, std::ofstream& labels) {
  const Index h = split.images.dim(2), w = split.images.dim(3), hw = h * w;
  for (Index i = 0; i < split.size(); ++i) {
    io::GrayImage img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.bit_depth = 8;
    img.pixels.resize(static_cast<std::size_t>(hw));
    for (Index p = 0; p < hw; ++p)
      img.pixels[static_cast<std::size_t>(p)] = static_cast<std::uint16_t>(
          std::lround(static_cast<double>(split.images[i * hw + p]) * 255.0));
    const std::string& id = split.ids[static_cast<std::size_t>(i)];
    io::write_png_gray((dir / "images" / id).string(), img);
    if (split.has_roi) {
      io::GrayImage roi = img;
      for (Index p = 0; p < hw; ++p)
        roi.pixels[static_cast<std::size_t>(p)] = split.rois[i * hw + p] != Scalar(0) ? 255 : 0;
      io::write_png_gray((dir / "roi" / id).string(), roi);
    }
    labels << id << ',' << split.labels[static_cast<std::size_t>(i)] << ',' << split_name << '\n';
  }
}

/// Serializes a generated dataset into the folder layout above.
template <typename Scalar>
void write_dataset(const Dataset<Scalar>& d, const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir / "images");
  if (d.train.has_roi) fs::create_directories(dir / "roi");
  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw io_error("cannot write labels.csv in " + out_dir);
  labels << "filename,label,split\n";
  write_split_files(d.train, "train", dir, labels);
  write_split_files(d.val, "val", dir, labels);
  write_split_files(d.test, "test", dir, labels);
}

namespace detail {

struct FolderRow {
  std::string filename;
  int label = 0;
  std::string split;  // may be empty
};

// Largest-remainder 60/25/15 assignment, ordered by filename hash.
inline void assign_missing_splits(std::vector<FolderRow>& rows) {
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].split.empty()) open.push_back(i);
  if (open.empty()) return;
  std::sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
    const auto ha = fnv1a64(rows[a].filename), hb = fnv1a64(rows[b].filename);
    return ha != hb ? ha < hb : rows[a].filename < rows[b].filename;
  });
  const double n = static_cast<double>(open.size());
  const double fracs[3] = {0.60, 0.25, 0.15};
  std::size_t counts[3];
  double rema[3];
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = fracs[s] * n;
    counts[s] = static_cast<std::size_t>(exact);
    rema[s] = exact - static_cast<double>(counts[s]);
    assigned += counts[s];
  }
  while (assigned < open.size()) {
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (rema[s] > rema[best]) best = s;
    counts[best] += 1;
    rema[best] = -1;
    assigned += 1;
  }
  const char* names[3] = {"train", "val", "test"};
  std::size_t at = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < counts[s]; ++k) rows[open[at++]].split = names[s];
}

template <typename Scalar>
std::vector<Scalar> load_gray_scaled(const fs::path& path, Index h, Index w) {
  io::GrayImage img = path.extension() == ".pgm" ? io::read_pgm(path.string())
                                                 : io::read_png_gray(path.string());
  const Scalar denom = img.bit_depth == 16 ? Scalar(65535) : Scalar(255);
  std::vector<Scalar> vals(img.pixels.size());
  for (std::size_t i = 0; i < vals.size(); ++i)
    vals[i] = static_cast<Scalar>(img.pixels[i]) / denom;
  return bilinear_resize(vals, img.height, img.width, h, w);
}

}  // namespace detail

/// Ingests an image folder with labels.csv into a dataset, decoding to
/// grayscale [0,1] and resizing to height x width.
template <typename Scalar>
Dataset<Scalar> load_folder(const std::string& path, Index height, Index width) {
  const fs::path dir(path);
  if (!fs::exists(dir / "labels.csv")) throw io_error("missing labels.csv in " + path);
  io::CsvTable table = io::read_csv((dir / "labels.csv").string());
  if (table.header.size() < 2 || table.header[0] != "filename")
    throw io_error("labels.csv must start with filename,label[,split] header: " + path);

  std::vector<detail::FolderRow> rows;
  for (const auto& r : table.rows) {
    if (r.size() < 2) throw io_error("short row in labels.csv: " + path);
    detail::FolderRow row;
    row.filename = r[0];
    row.label = static_cast<int>(io::parse_double(r[1]));
    if (r.size() >= 3) row.split = r[2];
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw io_error("labels.csv lists no samples: " + path);
  detail::assign_missing_splits(rows);

  int classes = 0;
  for (const auto& r : rows) classes = std::max(classes, r.label + 1);

  const bool roi_dir = fs::exists(dir / "roi");
  Dataset<Scalar> d;
  d.height = height;
  d.width = width;
  d.classes = classes;
  for (const char* split_name : {"train", "val", "test"}) {
    std::vector<const detail::FolderRow*> members;
    for (const auto& r : rows)
      if (r.split == split_name) members.push_back(&r);
    Split<Scalar> s = make_split<Scalar>(static_cast<Index>(members.size()), height, width,
                                         roi_dir);
    const Index hw = height * width;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const fs::path img_path = dir / "images" / members[i]->filename;
      if (!fs::exists(img_path))
        throw io_error("image listed in labels.csv not found: " + img_path.string());
      auto vals = detail::load_gray_scaled<Scalar>(img_path, height, width);
      std::copy(vals.begin(), vals.end(), s.images.data() + static_cast<Index>(i) * hw);
      s.labels[i] = members[i]->label;
      s.ids[i] = members[i]->filename;
      if (roi_dir) {
        const fs::path roi_path = dir / "roi" / members[i]->filename;
        if (fs::exists(roi_path)) {
          auto roi = detail::load_gray_scaled<Scalar>(roi_path, height, width);
          for (Index p = 0; p < hw; ++p)
            s.rois[static_cast<Index>(i) * hw + p] = roi[static_cast<std::size_t>(p)] > Scalar(0.5)
                                                         ? Scalar(1)
                                                         : Scalar(0);
        }
      }
    }
    if (std::string(split_name) == "train") d.train = std::move(s);
    else if (std::string(split_name) == "val") d.val = std::move(s);
    else d.test = std::move(s);
  }
  return d;
}

}  // namespace apga::data
