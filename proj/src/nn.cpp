#include "icicle/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "icicle/errors.hpp"

namespace icicle {

void ModelParams::add(const std::string& name, Tensor tensor) {
    if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    if (!tensor.requires_grad()) {
        throw ContractError("parameter '" + name + "' must require grad");
    }
    params_.push_back({name, std::move(tensor)});
}

Tensor ModelParams::get(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw ContractError("unknown parameter '" + name + "'");
}

bool ModelParams::contains(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return true;
    }
    return false;
}

std::vector<Tensor> ModelParams::tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.tensor);
    return out;
}

void ModelParams::zero_grads() {
    for (auto& p : params_) p.tensor.zero_grad();
}

Tensor dense(const DenseLayer& layer, const Tensor& x) {
    return add_row_broadcast(matmul(x, layer.weight), layer.bias);
}

Tensor make_weight(Shape shape, std::size_t fan_in, Rng& rng, InitKind kind) {
    const double scale = kind == InitKind::kHe ? std::sqrt(2.0 / static_cast<double>(fan_in))
                                               : std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = scale * rng.normal();
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng, InitKind kind) {
    DenseLayer layer;
    layer.weight = make_weight({in, out}, in, rng, kind);
    layer.bias = Tensor::zeros({1, out}, true);
    return layer;
}

BackboneParams make_backbone(std::size_t height, std::size_t width, std::size_t out_dim,
                             Rng& rng) {
    auto conv_out = [](std::size_t e) { return e - 2; };        // 3x3 valid
    auto pool_out = [](std::size_t e) { return e / 2; };        // 2x2 stride 2
    // two conv(3x3) + pool(2x2) stages need at least 10 pixels per side
    if (height < 10 || width < 10) {
        throw DimensionError("backbone: image size " + std::to_string(height) + "x" +
                             std::to_string(width) + " too small for two conv+pool stages");
    }
    const std::size_t h1 = pool_out(conv_out(height)), w1 = pool_out(conv_out(width));
    const std::size_t h2 = pool_out(conv_out(h1)), w2 = pool_out(conv_out(w1));
    BackboneParams p;
    p.conv1 = make_weight({8, 3, 3, 3}, 3 * 3 * 3, rng, InitKind::kHe);
    p.conv2 = make_weight({16, 8, 3, 3}, 8 * 3 * 3, rng, InitKind::kHe);
    p.fc = make_dense(16 * h2 * w2, out_dim, rng, InitKind::kXavier);
    p.in_height = height;
    p.in_width = width;
    p.out_dim = out_dim;
    return p;
}

Tensor backbone_forward(const BackboneParams& params, const Tensor& images) {
    const auto& s = images.shape();
    if (s.size() != 4 || s[1] != 3 || s[2] != params.in_height || s[3] != params.in_width) {
        throw DimensionError("backbone: expected Nx3x" + std::to_string(params.in_height) + "x" +
                             std::to_string(params.in_width) + " batch, got " + shape_str(s));
    }
    Tensor h = maxpool2x2(relu(conv2d(images, params.conv1, 1)));
    h = maxpool2x2(relu(conv2d(h, params.conv2, 1)));
    const std::size_t flat = h.shape()[1] * h.shape()[2] * h.shape()[3];
    return dense(params.fc, reshape(h, {s[0], flat}));
}

IsmHeadParams make_ism_head(std::size_t d, std::size_t d_proj, Rng& rng) {
    IsmHeadParams p;
    p.fc1 = make_dense(d, d, rng, InitKind::kHe);
    p.fc2 = make_dense(d, d_proj, rng, InitKind::kXavier);
    return p;
}

Tensor ism_forward(const IsmHeadParams& params, const Tensor& features) {
    return dense(params.fc2, relu(dense(params.fc1, features)));
}

AutoEncoderParams make_autoencoder(std::size_t d, std::size_t k, Rng& rng,
                                   const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> widths;
    widths.push_back(d);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(k);
    AutoEncoderParams p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        p.encoder.push_back(make_dense(widths[l], widths[l + 1], rng, InitKind::kHe));
    }
    for (std::size_t l = widths.size() - 1; l > 0; --l) {
        p.decoder.push_back(make_dense(widths[l], widths[l - 1], rng, InitKind::kHe));
    }
    return p;
}

std::size_t AutoEncoderParams::bottleneck_width() const {
    return encoder.back().weight.shape()[1];
}

std::size_t AutoEncoderParams::input_width() const { return encoder.front().weight.shape()[0]; }

std::vector<Tensor> encoder_forward(const AutoEncoderParams& params, const Tensor& z) {
    if (z.shape().size() != 2 || z.shape()[1] != params.input_width()) {
        throw DimensionError("encoder: expected Nx" + std::to_string(params.input_width()) +
                             " input, got " + shape_str(z.shape()));
    }
    std::vector<Tensor> layers;
    Tensor h = z;
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        h = dense(params.encoder[l], h);
        if (l + 1 < params.encoder.size()) h = relu(h);  // bottleneck stays raw
        layers.push_back(h);
    }
    return layers;
}

Tensor decoder_forward(const AutoEncoderParams& params, const Tensor& bottleneck) {
    if (bottleneck.shape().size() != 2 || bottleneck.shape()[1] != params.bottleneck_width()) {
        throw DimensionError("decoder: expected Nx" + std::to_string(params.bottleneck_width()) +
                             " input, got " + shape_str(bottleneck.shape()));
    }
    Tensor h = bottleneck;
    for (std::size_t l = 0; l < params.decoder.size(); ++l) {
        h = dense(params.decoder[l], h);
        if (l + 1 < params.decoder.size()) h = relu(h);  // raw reconstruction output
    }
    return h;
}

void register_params(ModelParams& into, const std::string& prefix, const DenseLayer& layer) {
    into.add(prefix + ".W", layer.weight);
    into.add(prefix + ".b", layer.bias);
}

void register_params(ModelParams& into, const std::string& prefix, const BackboneParams& p) {
    into.add(prefix + ".conv1", p.conv1);
    into.add(prefix + ".conv2", p.conv2);
    register_params(into, prefix + ".fc", p.fc);
}

void register_params(ModelParams& into, const std::string& prefix, const IsmHeadParams& p) {
    register_params(into, prefix + ".fc1", p.fc1);
    register_params(into, prefix + ".fc2", p.fc2);
}

void register_params(ModelParams& into, const std::string& prefix, const AutoEncoderParams& p) {
    for (std::size_t l = 0; l < p.encoder.size(); ++l) {
        register_params(into, prefix + ".enc" + std::to_string(l), p.encoder[l]);
    }
    for (std::size_t l = 0; l < p.decoder.size(); ++l) {
        register_params(into, prefix + ".dec" + std::to_string(l), p.decoder[l]);
    }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double learning_rate)
    : params_(std::move(params)), lr_(learning_rate) {
    if (lr_ < 0.0) throw ConfigError("adam: learning rate must be >= 0");
    for (const auto& p : params_) {
        if (!p.requires_grad()) throw ContractError("adam: parameter does not require grad");
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& w = params_[p].mutable_data();
        const auto& g = params_[p].grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + 1e-8);
        }
    }
}

void AdamOptimizer::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

// ---- checkpoint io ----

namespace {

constexpr char kCkptMagic[4] = {'I', 'C', 'K', '1'};

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is, std::size_t& offset, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string("truncated checkpoint reading ") + what, offset);
    }
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<Parameter>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing", 0);
    os.write(kCkptMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.tensor.shape().size()));
        for (std::size_t e : p.tensor.shape()) put_u32(os, static_cast<std::uint32_t>(e));
        os.write(reinterpret_cast<const char*>(p.tensor.data().data()),
                 static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
    }
    if (!os) throw FormatError("write failed for '" + path + "'", 0);
}

std::vector<Parameter> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "' for reading", 0);
    std::size_t offset = 0;
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0) {
        throw FormatError("bad magic", 0);
    }
    offset = 4;
    const std::uint32_t count = get_u32(is, offset, "count");
    std::vector<Parameter> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is, offset, "name length");
        if (name_len > 4096) throw FormatError("implausible tensor name length", offset - 4);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw FormatError("truncated name", offset);
        offset += name_len;
        const std::uint32_t ndim = get_u32(is, offset, "rank");
        Shape shape(ndim);
        for (auto& e : shape) e = get_u32(is, offset, "extent");
        std::vector<double> data(shape_numel(shape));
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(data.size() * sizeof(double)))) {
            throw FormatError("truncated tensor data for '" + name + "'", offset);
        }
        offset += data.size() * sizeof(double);
        out.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
    }
    return out;
}

}  // namespace icicle
