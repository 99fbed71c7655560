#include "reprdyn/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "reprdyn/rng.hpp"

namespace reprdyn {

void Dataset::validate() const {
  if (inputs.cols() != targets.cols()) {
    throw DatasetError(name + ": inputs and targets differ in length");
  }
  if (!labels.empty() && labels.size() != size()) {
    throw DatasetError(name + ": label count mismatch");
  }
  if (pair_of_interest &&
      (pair_of_interest->first >= size() || pair_of_interest->second >= size())) {
    throw DatasetError(name + ": pair_of_interest out of range");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.name = name;
  out.generator = generator;
  out.generator["subset_size"] = std::to_string(indices.size());
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  out.targets.resize(targets.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw DatasetError(name + ": subset index out of range");
    const auto src = static_cast<Eigen::Index>(indices[k]);
    out.inputs.col(static_cast<Eigen::Index>(k)) = inputs.col(src);
    out.targets.col(static_cast<Eigen::Index>(k)) = targets.col(src);
    if (!labels.empty()) out.labels.push_back(labels[indices[k]]);
  }
  if (pair_of_interest) {
    auto a = std::find(indices.begin(), indices.end(), pair_of_interest->first);
    auto b = std::find(indices.begin(), indices.end(), pair_of_interest->second);
    if (a != indices.end() && b != indices.end()) {
      out.pair_of_interest = {static_cast<std::size_t>(a - indices.begin()),
                              static_cast<std::size_t>(b - indices.begin())};
    }
  }
  return out;
}

Dataset two_point(double dx, double dy) {
  Dataset d;
  d.name = "two_point";
  d.inputs.resize(1, 2);
  d.targets.resize(1, 2);
  d.inputs << -1.0, -1.0 + dx;
  d.targets << 0.6, 0.6 + dy;
  d.pair_of_interest = {0, 1};
  std::ostringstream sx, sy;
  sx.precision(17);
  sy.precision(17);
  sx << dx;
  sy << dy;
  d.generator = {{"dx", sx.str()}, {"dy", sy.str()}};
  if (dx == 0.0) d.generator["degenerate_input_separation"] = "true";
  return d;
}

Dataset xor_dataset() {
  Dataset d;
  d.name = "xor";
  d.inputs.resize(2, 4);
  d.targets.resize(1, 4);
  d.inputs << 0, 1, 0, 1,
              0, 0, 1, 1;
  d.targets << 0, 1, 1, 0;
  return d;
}

BlobCoord blob_coord(std::size_t index, int grid) {
  const auto g = static_cast<std::size_t>(grid);
  const auto per_context = g * g;
  return {static_cast<int>(index / per_context), static_cast<int>((index % per_context) / g),
          static_cast<int>(index % g)};
}

Dataset blobs(const BlobOptions& opt) {
  if (opt.grid < 2 || opt.image < 1 || !(opt.variance > 0.0)) {
    throw DatasetError("blobs: grid >= 2, image >= 1 and variance > 0 required");
  }
  const int px = opt.image * opt.image;
  const auto n = static_cast<Eigen::Index>(2 * opt.grid * opt.grid);
  Dataset d;
  d.name = "blobs";
  d.inputs.setZero(px + 2, n);
  d.targets.resize(1, n);
  const double span = static_cast<double>(opt.image - 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const BlobCoord c = blob_coord(static_cast<std::size_t>(k), opt.grid);
    const double fx = static_cast<double>(c.i) / (opt.grid - 1);
    const double fy = static_cast<double>(c.j) / (opt.grid - 1);
    const double cx = fx * span;
    const double cy = fy * span;
    for (int row = 0; row < opt.image; ++row) {
      for (int col = 0; col < opt.image; ++col) {
        const double r2 = (col - cx) * (col - cx) + (row - cy) * (row - cy);
        d.inputs(row * opt.image + col, k) = std::exp(-r2 / (2.0 * opt.variance));
      }
    }
    d.inputs(px + c.context, k) = 1.0;
    d.targets(0, k) = c.context == 0 ? fx : fy;
  }
  d.generator = {{"grid", std::to_string(opt.grid)},
                 {"image", std::to_string(opt.image)},
                 {"variance_px2", std::to_string(opt.variance)},
                 {"context_encoding", "one-hot, scale 1"},
                 {"target_scale", "[0,1]"}};
  return d;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw DatasetError(what + ": truncated header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DatasetError("cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DatasetError("cannot open " + labels_path.string());

  const std::string iname = images_path.filename().string();
  const std::string lname = labels_path.filename().string();
  if (read_be32(img, iname) != 2051) throw DatasetError(iname + ": bad magic (expected 2051)");
  if (read_be32(lab, lname) != 2049) throw DatasetError(lname + ": bad magic (expected 2049)");
  const std::uint32_t n_img = read_be32(img, iname);
  const std::uint32_t rows = read_be32(img, iname);
  const std::uint32_t cols = read_be32(img, iname);
  const std::uint32_t n_lab = read_be32(lab, lname);
  if (n_img != n_lab) {
    throw DatasetError("mnist: image count " + std::to_string(n_img) + " != label count " +
                       std::to_string(n_lab));
  }

  const std::size_t dim = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(dim * n_img);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw DatasetError(iname + ": truncated pixel data");
  }
  std::vector<unsigned char> raw_labels(n_lab);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(raw_labels.size()))) {
    throw DatasetError(lname + ": truncated label data");
  }

  Dataset d;
  d.name = "mnist";
  d.inputs.resize(static_cast<Eigen::Index>(dim), n_img);
  d.targets.setZero(10, n_img);
  d.labels.resize(n_img);
  for (std::uint32_t k = 0; k < n_img; ++k) {
    for (std::size_t p = 0; p < dim; ++p) {
      d.inputs(static_cast<Eigen::Index>(p), k) = pixels[k * dim + p] / 255.0;
    }
    const int label = raw_labels[k];
    if (label > 9) throw DatasetError(lname + ": label out of range");
    d.labels[k] = label;
    d.targets(label, k) = 1.0;
  }
  d.generator = {{"images", images_path.string()},
                 {"labels", labels_path.string()},
                 {"target_encoding", "one-hot"},
                 {"pixel_scale", "[0,1]"}};
  return d;
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols) {
    throw DatasetError("write_idx_images: pixel buffer size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  write_be32(out, 2051);
  write_be32(out, count);
  write_be32(out, rows);
  write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  write_be32(out, 2049);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

namespace {

std::string read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");  // transparently reads plain files too
  if (f == nullptr) throw DatasetError("cannot open " + path.string());
  std::string text;
  std::array<char, 1 << 16> buf{};
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    text.append(buf.data(), static_cast<std::size_t>(n));
  }
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DatasetError(path.string() + ": decompression error");
  return text;
}

}  // namespace

MnistPrepResult convert_mnist_csv(const std::filesystem::path& csv_path,
                                  const std::filesystem::path& out_dir, std::uint64_t shuffle_seed,
                                  std::size_t limit) {
  constexpr std::size_t kPixels = 784;
  const std::string text = read_maybe_gzip(csv_path);
  std::vector<std::array<std::uint8_t, kPixels>> images;
  std::vector<std::uint8_t> labels;

  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::array<std::uint8_t, kPixels> img{};
    std::size_t field = 0;
    const char* p = line.c_str();
    int label = -1;
    while (*p != '\0' && *p != '\r') {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw DatasetError(csv_path.string() + ":" + std::to_string(line_no) + ": bad number");
      if (field < kPixels) {
        img[field] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      } else if (field == kPixels) {
        label = static_cast<int>(std::lround(v));
      }
      ++field;
      p = end;
      if (*p == ',') ++p;
    }
    if (field != kPixels + 1 || label < 0 || label > 9) {
      throw DatasetError(csv_path.string() + ":" + std::to_string(line_no) +
                         ": expected 784 pixels and a label in 0..9");
    }
    images.push_back(img);
    labels.push_back(static_cast<std::uint8_t>(label));
  }

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed != 0) {
    Pcg32 rng(shuffle_seed, 0x6d6e697374ULL);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
    }
  }
  if (limit != 0 && limit < order.size()) order.resize(limit);

  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> out_labels;
  pixels.reserve(order.size() * kPixels);
  for (std::size_t k : order) {
    pixels.insert(pixels.end(), images[k].begin(), images[k].end());
    out_labels.push_back(labels[k]);
  }
  std::filesystem::create_directories(out_dir);
  MnistPrepResult r;
  r.images = out_dir / "train-images-idx3-ubyte";
  r.labels = out_dir / "train-labels-idx1-ubyte";
  r.count = order.size();
  write_idx_images(r.images, pixels, static_cast<std::uint32_t>(order.size()), 28, 28);
  write_idx_labels(r.labels, out_labels);
  return r;
}

std::vector<std::size_t> first_sorted_by_label(const Dataset& data, std::size_t n) {
  if (data.labels.size() != data.size()) throw DatasetError(data.name + ": dataset has no labels");
  n = std::min(n, data.size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return data.labels[a] < data.labels[b]; });
  return idx;
}

std::pair<std::size_t, std::size_t> random_pair_with_labels(const Dataset& data, int label_a,
                                                            int label_b, std::uint64_t seed) {
  std::vector<std::size_t> as, bs;
  for (std::size_t k = 0; k < data.labels.size(); ++k) {
    if (data.labels[k] == label_a) as.push_back(k);
    if (data.labels[k] == label_b) bs.push_back(k);
  }
  if (as.empty() || bs.empty()) throw DatasetError(data.name + ": requested label not present");
  Pcg32 rng(seed, 0x70616972ULL);
  const std::size_t a = as[rng.below(static_cast<std::uint32_t>(as.size()))];
  std::size_t b = bs[rng.below(static_cast<std::uint32_t>(bs.size()))];
  if (a == b) {
    if (bs.size() < 2) throw DatasetError(data.name + ": cannot draw two distinct items");
    while (b == a) b = bs[rng.below(static_cast<std::uint32_t>(bs.size()))];
  }
  return {a, b};
}

}  // namespace reprdyn
