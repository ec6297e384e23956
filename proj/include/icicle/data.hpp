#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "icicle/tensor.hpp"

namespace icicle {

/// Recipe for a synthetic colored-texture dataset.
struct SyntheticSpec {
    int num_clusters = 3;
    int images_per_cluster = 100;
    int image_size = 16;  // H == W, C fixed at 3
    std::vector<std::array<double, 3>> color_centers;  // empty -> default palette
    double noise_sigma = 0.05;
    std::uint64_t seed = 42;
};

/// Evenly separated RGB centers for k clusters.
std::vector<std::array<double, 3>> default_color_centers(int k);

/// Throws ConfigError naming the violated invariant.
void validate(const SyntheticSpec& spec);

struct ImageDataset {
    Tensor images;            // N x 3 x H x W, values in [0,1]
    std::vector<int> labels;  // ground truth in [0, K)
    int num_clusters = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t channels() const { return images.shape()[1]; }
    std::size_t height() const { return images.shape()[2]; }
    std::size_t width() const { return images.shape()[3]; }
};

/// Two stochastic augmentation views of the same source images.
struct AugmentedPair {
    Tensor view_a;  // N x C x H x W
    Tensor view_b;
    std::vector<int> source_indices;
};

/// Cluster color + texture template plus Gaussian pixel noise, clamped to
/// [0,1] and quantized to float32 so the on-disk round-trip is bit-exact.
ImageDataset generate_dataset(const SyntheticSpec& spec);

/// Per image and view, one augmentation sampled from {crop-and-resize,
/// horizontal flip, additive noise, brightness jitter}.
AugmentedPair augment(const Tensor& images, std::uint64_t seed);
AugmentedPair augment(const ImageDataset& dataset, std::uint64_t seed);

/// Both views equal the source exactly (degenerate parameters).
AugmentedPair augment_identity(const Tensor& images);

/// Rows of `images` (N x C x H x W) selected by index into a new batch tensor.
Tensor select_images(const Tensor& images, const std::vector<std::size_t>& indices);

void write_dataset(const ImageDataset& dataset, const std::string& path);
ImageDataset read_dataset(const std::string& path);

struct DatasetHeader {
    std::uint32_t n = 0, c = 0, h = 0, w = 0, k = 0;
};

/// Validate magic and read the header without loading pixel data.
DatasetHeader read_dataset_header(const std::string& path);

}  // namespace icicle
