#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icicle/rng.hpp"
#include "icicle/tensor.hpp"

namespace icicle {

/// Named trainable tensor; names are unique within a ModelParams collection.
struct Parameter {
    std::string name;
    Tensor tensor;  // requires_grad == true
};

/// Ordered, name-indexed collection of parameters.
class ModelParams {
public:
    void add(const std::string& name, Tensor tensor);
    Tensor get(const std::string& name) const;
    bool contains(const std::string& name) const;
    const std::vector<Parameter>& all() const { return params_; }
    std::vector<Tensor> tensors() const;
    void zero_grads();

private:
    std::vector<Parameter> params_;
};

struct DenseLayer {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out
};

Tensor dense(const DenseLayer& layer, const Tensor& x);

enum class InitKind { kHe, kXavier };

DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng, InitKind kind);
Tensor make_weight(Shape shape, std::size_t fan_in, Rng& rng, InitKind kind);

/// Two conv+relu+maxpool stages (3->8, 8->16 channels, 3x3 kernels) and a
/// dense layer down to the feature width d.
struct BackboneParams {
    Tensor conv1;  // 8 x 3 x 3 x 3
    Tensor conv2;  // 16 x 8 x 3 x 3
    DenseLayer fc;
    std::size_t in_height = 0;
    std::size_t in_width = 0;
    std::size_t out_dim = 0;
};

BackboneParams make_backbone(std::size_t height, std::size_t width, std::size_t out_dim, Rng& rng);
Tensor backbone_forward(const BackboneParams& params, const Tensor& images);

/// Two dense layers with ReLU between, d -> d -> d_proj.
struct IsmHeadParams {
    DenseLayer fc1;
    DenseLayer fc2;
};

IsmHeadParams make_ism_head(std::size_t d, std::size_t d_proj, Rng& rng);
Tensor ism_forward(const IsmHeadParams& params, const Tensor& features);

/// Encoder d -> 500 -> 500 -> 2000 -> K, decoder mirrored. ReLU on hidden
/// layers, identity at the bottleneck and the reconstruction output.
struct AutoEncoderParams {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;

    std::size_t num_layers() const { return encoder.size(); }
    std::size_t bottleneck_width() const;
    std::size_t input_width() const;
};

/// Default hidden widths follow the d-500-500-2000-K layout; tests may pass
/// shrunken widths.
AutoEncoderParams make_autoencoder(std::size_t d, std::size_t k, Rng& rng,
                                   const std::vector<std::size_t>& hidden = {500, 500, 2000});

/// All layer outputs H^(1..L); hidden layers ReLU-activated, bottleneck raw.
std::vector<Tensor> encoder_forward(const AutoEncoderParams& params, const Tensor& z);
Tensor decoder_forward(const AutoEncoderParams& params, const Tensor& bottleneck);

void register_params(ModelParams& into, const std::string& prefix, const DenseLayer& layer);
void register_params(ModelParams& into, const std::string& prefix, const BackboneParams& p);
void register_params(ModelParams& into, const std::string& prefix, const IsmHeadParams& p);
void register_params(ModelParams& into, const std::string& prefix, const AutoEncoderParams& p);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, double learning_rate);
    void step();
    void zero_grads();
    double learning_rate() const { return lr_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_;
    std::uint64_t t_ = 0;
};

/// Checkpoint file: magic "ICK1", little-endian u32 count, then per tensor
/// u32 name length, name bytes, u32 ndim, u32 dims, f64 data.
void write_checkpoint(const std::string& path, const std::vector<Parameter>& params);
std::vector<Parameter> read_checkpoint(const std::string& path);

}  // namespace icicle
