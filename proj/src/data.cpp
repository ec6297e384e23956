#include "icicle/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "icicle/errors.hpp"
#include "icicle/rng.hpp"

namespace icicle {

namespace {

constexpr char kMagic[4] = {'I', 'C', 'G', '1'};
constexpr double kTextureAmplitude = 0.1;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Deterministic per-cluster texture: horizontal / vertical / diagonal
// gradient in [-amp, amp], cycling with the cluster index.
double texture_value(int cluster, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
    const double fy = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    const double fx = w > 1 ? static_cast<double>(x) / static_cast<double>(w - 1) : 0.0;
    double t = 0.0;
    switch (cluster % 3) {
        case 0: t = fx; break;           // horizontal
        case 1: t = fy; break;           // vertical
        default: t = (fx + fy) / 2.0;    // diagonal
    }
    return kTextureAmplitude * (2.0 * t - 1.0);
}

}  // namespace

std::vector<std::array<double, 3>> default_color_centers(int k) {
    // fixed saturated palette, then evenly spaced hues for larger k
    static const std::array<double, 3> base[] = {
        {0.9, 0.15, 0.15}, {0.15, 0.9, 0.15}, {0.15, 0.15, 0.9},
        {0.9, 0.9, 0.1},   {0.9, 0.1, 0.9},   {0.1, 0.9, 0.9},
    };
    std::vector<std::array<double, 3>> centers;
    for (int i = 0; i < k; ++i) {
        if (i < 6) {
            centers.push_back(base[i]);
        } else {
            const double hue = 6.0 * static_cast<double>(i - 6 + 0.5) / static_cast<double>(k);
            const double frac = hue - std::floor(hue);
            centers.push_back({0.2 + 0.6 * frac, 0.8 - 0.6 * frac, 0.5});
        }
    }
    return centers;
}

void validate(const SyntheticSpec& spec) {
    if (spec.num_clusters < 2) {
        throw ConfigError("synthetic spec: num_clusters must be >= 2, got " +
                          std::to_string(spec.num_clusters));
    }
    if (spec.images_per_cluster < 1) {
        throw ConfigError("synthetic spec: images_per_cluster must be positive");
    }
    if (spec.image_size < 1) throw ConfigError("synthetic spec: image_size must be positive");
    if (spec.noise_sigma < 0.0) throw ConfigError("synthetic spec: noise_sigma must be >= 0");
    const auto centers =
        spec.color_centers.empty() ? default_color_centers(spec.num_clusters) : spec.color_centers;
    if (static_cast<int>(centers.size()) != spec.num_clusters) {
        throw ConfigError("synthetic spec: expected " + std::to_string(spec.num_clusters) +
                          " color centers, got " + std::to_string(centers.size()));
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (double v : centers[i]) {
            if (v < 0.0 || v > 1.0) {
                throw ConfigError("synthetic spec: color center " + std::to_string(i) +
                                  " outside [0,1]");
            }
        }
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = centers[i][c] - centers[j][c];
                d2 += d * d;
            }
            if (std::sqrt(d2) < 4.0 * spec.noise_sigma) {
                throw ConfigError("synthetic spec: color centers " + std::to_string(i) + " and " +
                                  std::to_string(j) + " closer than 4*noise_sigma");
            }
        }
    }
}

ImageDataset generate_dataset(const SyntheticSpec& spec) {
    validate(spec);
    const auto centers =
        spec.color_centers.empty() ? default_color_centers(spec.num_clusters) : spec.color_centers;
    const std::size_t h = static_cast<std::size_t>(spec.image_size);
    const std::size_t w = h;
    const std::size_t n =
        static_cast<std::size_t>(spec.num_clusters) * static_cast<std::size_t>(spec.images_per_cluster);
    std::vector<double> pixels(n * 3 * h * w);
    std::vector<int> labels(n);
    Rng rng(derive_seed(spec.seed, 0x6461746167656eULL));
    std::size_t img = 0;
    for (int k = 0; k < spec.num_clusters; ++k) {
        for (int rep = 0; rep < spec.images_per_cluster; ++rep, ++img) {
            labels[img] = k;
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t y = 0; y < h; ++y) {
                    for (std::size_t x = 0; x < w; ++x) {
                        double v = centers[static_cast<std::size_t>(k)][c] +
                                   texture_value(k, y, x, h, w);
                        if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
                        // quantize to float32 so write/read round-trips bitwise
                        pixels[((img * 3 + c) * h + y) * w + x] =
                            static_cast<double>(static_cast<float>(clamp01(v)));
                    }
                }
            }
        }
    }
    ImageDataset ds;
    ds.images = Tensor::from_data({n, 3, h, w}, std::move(pixels));
    ds.labels = std::move(labels);
    ds.num_clusters = spec.num_clusters;
    return ds;
}

Tensor select_images(const Tensor& images, const std::vector<std::size_t>& indices) {
    const auto& s = images.shape();
    if (s.size() != 4) throw DimensionError("select_images: expected 4-D image tensor");
    const std::size_t stride = s[1] * s[2] * s[3];
    std::vector<double> out(indices.size() * stride);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= s[0]) throw ContractError("select_images: index out of range");
        std::memcpy(out.data() + i * stride, images.data().data() + indices[i] * stride,
                    stride * sizeof(double));
    }
    return Tensor::from_data({indices.size(), s[1], s[2], s[3]}, std::move(out));
}

namespace {

enum class Aug { kCropResize = 0, kFlip = 1, kNoise = 2, kBrightness = 3 };

void apply_augmentation(const double* src, double* dst, std::size_t c, std::size_t h,
                        std::size_t w, Rng& rng) {
    const std::size_t plane = h * w;
    const Aug kind = static_cast<Aug>(rng.index(4));
    switch (kind) {
        case Aug::kCropResize: {
            // area >= 60% => side factor in [sqrt(0.6), 1]
            const double side = std::sqrt(rng.uniform(0.6, 1.0));
            const std::size_t ch = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                                std::lround(side * static_cast<double>(h))));
            const std::size_t cw = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                                std::lround(side * static_cast<double>(w))));
            const std::size_t y0 = ch < h ? rng.index(h - ch + 1) : 0;
            const std::size_t x0 = cw < w ? rng.index(w - cw + 1) : 0;
            for (std::size_t ci = 0; ci < c; ++ci) {
                for (std::size_t y = 0; y < h; ++y) {
                    // nearest-neighbor source row
                    std::size_t sy = y0 + std::min(ch - 1, (y * ch + ch / 2) / h);
                    for (std::size_t x = 0; x < w; ++x) {
                        std::size_t sx = x0 + std::min(cw - 1, (x * cw + cw / 2) / w);
                        dst[ci * plane + y * w + x] = src[ci * plane + sy * w + sx];
                    }
                }
            }
            break;
        }
        case Aug::kFlip: {
            for (std::size_t ci = 0; ci < c; ++ci) {
                for (std::size_t y = 0; y < h; ++y) {
                    for (std::size_t x = 0; x < w; ++x) {
                        dst[ci * plane + y * w + x] = src[ci * plane + y * w + (w - 1 - x)];
                    }
                }
            }
            break;
        }
        case Aug::kNoise: {
            for (std::size_t i = 0; i < c * plane; ++i) {
                dst[i] = clamp01(src[i] + rng.normal(0.0, 0.02));
            }
            break;
        }
        case Aug::kBrightness: {
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double delta = rng.uniform(-0.2, 0.2);
                for (std::size_t i = 0; i < plane; ++i) {
                    dst[ci * plane + i] = clamp01(src[ci * plane + i] + delta);
                }
            }
            break;
        }
    }
}

}  // namespace

AugmentedPair augment(const Tensor& images, std::uint64_t seed) {
    const auto& s = images.shape();
    if (s.size() != 4) throw DimensionError("augment: expected 4-D image tensor");
    const std::size_t n = s[0], c = s[1], h = s[2], w = s[3];
    const std::size_t stride = c * h * w;
    std::vector<double> va(n * stride), vb(n * stride);
    Rng rng(derive_seed(seed, 0x61756721ULL));
    const double* src = images.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        apply_augmentation(src + i * stride, va.data() + i * stride, c, h, w, rng);
        apply_augmentation(src + i * stride, vb.data() + i * stride, c, h, w, rng);
    }
    AugmentedPair pair;
    pair.view_a = Tensor::from_data({n, c, h, w}, std::move(va));
    pair.view_b = Tensor::from_data({n, c, h, w}, std::move(vb));
    pair.source_indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) pair.source_indices[i] = static_cast<int>(i);
    return pair;
}

AugmentedPair augment(const ImageDataset& dataset, std::uint64_t seed) {
    return augment(dataset.images, seed);
}

AugmentedPair augment_identity(const Tensor& images) {
    AugmentedPair pair;
    pair.view_a = images.detach();
    pair.view_b = images.detach();
    pair.source_indices.resize(images.shape()[0]);
    for (std::size_t i = 0; i < pair.source_indices.size(); ++i) {
        pair.source_indices[i] = static_cast<int>(i);
    }
    return pair;
}

// ---- binary format: "ICG1", u32 N C H W K, f32 pixels, u32 labels ----

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is, std::size_t& offset, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string("truncated file reading ") + what, offset);
    }
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_dataset(const ImageDataset& dataset, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing", 0);
    os.write(kMagic, 4);
    const auto& s = dataset.images.shape();
    put_u32(os, static_cast<std::uint32_t>(s[0]));
    put_u32(os, static_cast<std::uint32_t>(s[1]));
    put_u32(os, static_cast<std::uint32_t>(s[2]));
    put_u32(os, static_cast<std::uint32_t>(s[3]));
    put_u32(os, static_cast<std::uint32_t>(dataset.num_clusters));
    for (double v : dataset.images.data()) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(os, bits);
    }
    for (int label : dataset.labels) put_u32(os, static_cast<std::uint32_t>(label));
    if (!os) throw FormatError("write failed for '" + path + "'", 0);
}

DatasetHeader read_dataset_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "' for reading", 0);
    std::size_t offset = 0;
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("bad magic: file shorter than 4 bytes", offset);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
    offset = 4;
    DatasetHeader h;
    h.n = get_u32(is, offset, "N");
    h.c = get_u32(is, offset, "C");
    h.h = get_u32(is, offset, "H");
    h.w = get_u32(is, offset, "W");
    h.k = get_u32(is, offset, "K");
    if (h.k == 0) throw FormatError("K must be positive", offset - 4);
    return h;
}

ImageDataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "' for reading", 0);
    std::size_t offset = 0;
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("bad magic: file shorter than 4 bytes", offset);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
    offset = 4;
    const std::uint32_t n = get_u32(is, offset, "N");
    const std::uint32_t c = get_u32(is, offset, "C");
    const std::uint32_t h = get_u32(is, offset, "H");
    const std::uint32_t w = get_u32(is, offset, "W");
    const std::uint32_t k = get_u32(is, offset, "K");
    if (k == 0) throw FormatError("K must be positive", offset - 4);
    const std::size_t count =
        static_cast<std::size_t>(n) * c * static_cast<std::size_t>(h) * w;
    std::vector<double> pixels(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = get_u32(is, offset, "pixels");
        float f;
        std::memcpy(&f, &bits, 4);
        if (!std::isfinite(f) || f < 0.0f || f > 1.0f) {
            throw FormatError("pixel outside [0,1]", offset - 4);
        }
        pixels[i] = static_cast<double>(f);
    }
    std::vector<int> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t label = get_u32(is, offset, "labels");
        if (label >= k) throw FormatError("label out of range", offset - 4);
        labels[i] = static_cast<int>(label);
    }
    ImageDataset ds;
    ds.images = Tensor::from_data({n, c, h, w}, std::move(pixels));
    ds.labels = std::move(labels);
    ds.num_clusters = static_cast<int>(k);
    return ds;
}

}  // namespace icicle
