#pragma once

// Training sets: the two-point task, XOR, the two-context Gaussian-blob task
// and MNIST (IDX files). Samples are stored column-wise.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace reprdyn {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::string name;
  Eigen::MatrixXd inputs;   ///< input_dim x N
  Eigen::MatrixXd targets;  ///< output_dim x N
  std::optional<std::pair<std::size_t, std::size_t>> pair_of_interest;
  std::vector<int> labels;  ///< class labels, MNIST only
  std::map<std::string, std::string> generator;  ///< parameters echoed into manifests

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  [[nodiscard]] int input_dim() const { return static_cast<int>(inputs.rows()); }
  [[nodiscard]] int output_dim() const { return static_cast<int>(targets.rows()); }

  void validate() const;

  /// Columns `indices`, in that order. Labels and pair_of_interest are dropped
  /// unless they survive the selection.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
};

Dataset two_point(double dx, double dy);
Dataset xor_dataset();

struct BlobOptions {
  int grid = 30;
  int image = 5;
  double variance = 1.0;  ///< pixel^2
};

/// 2 * grid^2 samples ordered as index = context * grid^2 + i * grid + j, where
/// i is the x (column) lattice position and j the y (row) position.
Dataset blobs(const BlobOptions& options = {});

struct BlobCoord {
  int context;  ///< 0 or 1
  int i;        ///< x lattice index
  int j;        ///< y lattice index
};
BlobCoord blob_coord(std::size_t index, int grid);

/// Reads an IDX3 image file (magic 2051) and IDX1 label file (magic 2049).
/// Pixels are scaled to [0, 1]; targets are one-hot over 10 classes.
Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path);

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

struct MnistPrepResult {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::size_t count = 0;
};

/// Converts a (optionally gzip-compressed) CSV with 784 pixel columns followed
/// by a label column into an IDX image/label pair. A nonzero shuffle seed
/// permutes the rows deterministically; zero keeps file order.
MnistPrepResult convert_mnist_csv(const std::filesystem::path& csv_path,
                                  const std::filesystem::path& out_dir, std::uint64_t shuffle_seed,
                                  std::size_t limit = 0);

/// The first n items, stably sorted by digit.
std::vector<std::size_t> first_sorted_by_label(const Dataset& data, std::size_t n);

/// A random (label_a, label_b) pair drawn from the label index lists.
std::pair<std::size_t, std::size_t> random_pair_with_labels(const Dataset& data, int label_a,
                                                            int label_b, std::uint64_t seed);

}  // namespace reprdyn
