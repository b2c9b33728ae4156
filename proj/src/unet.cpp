#include "edip/unet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "edip/rng.hpp"

namespace edip {

namespace {

struct BlockSpec {
    std::string name;
    BlockTag tag;
    Shape shape;
    int64_t fan_in;  // > 0 for conv weights (Kaiming init), 0 for biases, -1 for gn gains
};

std::vector<BlockSpec> build_specs(const UNetConfig& cfg) {
    const int64_t c = cfg.channels, sk = cfg.skip_channels, k = cfg.kernel_size;
    std::vector<BlockSpec> specs;
    auto conv = [&](const std::string& name, BlockTag tag, int64_t in, int64_t out, int64_t ks) {
        specs.push_back({name + ".w", tag, {out, in, ks, ks}, in * ks * ks});
        specs.push_back({name + ".b", tag, {out}, 0});
    };
    auto gn = [&](const std::string& name, BlockTag tag) {
        specs.push_back({name + ".gain", tag, {c}, -1});
        specs.push_back({name + ".bias", tag, {c}, 0});
    };
    for (int i = 0; i < cfg.scales; ++i) {
        const std::string p = "enc" + std::to_string(i);
        conv(p + ".conv0", BlockTag::Encoder, i == 0 ? 1 : c, c, k);
        gn(p + ".gn0", BlockTag::Encoder);
        conv(p + ".conv1", BlockTag::Encoder, c, c, k);
        gn(p + ".gn1", BlockTag::Encoder);
    }
    for (int i = 0; i < cfg.scales - 1; ++i)
        conv("skip" + std::to_string(i) + ".conv", BlockTag::Decoder, c, sk, 1);
    for (int i = cfg.scales - 2; i >= 0; --i) {
        const std::string p = "dec" + std::to_string(i);
        conv(p + ".conv0", BlockTag::Decoder, c + sk, c, k);
        gn(p + ".gn0", BlockTag::Decoder);
        conv(p + ".conv1", BlockTag::Decoder, c, c, k);
        gn(p + ".gn1", BlockTag::Decoder);
    }
    conv("out.conv", BlockTag::Decoder, c, 1, 1);
    return specs;
}

uint64_t fnv1a(uint64_t h, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void UNetConfig::validate() const {
    if (scales < 2) throw Error("unet: scales must be >= 2");
    if (channels < 1 || skip_channels < 1) throw Error("unet: channel counts must be positive");
    if (groups < 1 || channels % groups != 0)
        throw Error("unet: channels must be divisible by groups");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw Error("unet: kernel size must be odd");
}

uint64_t UNetConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int v : {scales, channels, skip_channels, kernel_size, groups})
        h = fnv1a(h, static_cast<uint64_t>(v));
    return h;
}

int64_t unet_param_count(const UNetConfig& config) {
    config.validate();
    int64_t total = 0;
    for (const auto& s : build_specs(config)) total += numel(s.shape);
    return total;
}

int64_t UNetParams::num_params() const {
    int64_t total = 0;
    for (const auto& b : blocks) total += b.tensor.numel();
    return total;
}

std::vector<double> UNetParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(num_params()));
    for (const auto& b : blocks) flat.insert(flat.end(), b.tensor.data().begin(), b.tensor.data().end());
    return flat;
}

void UNetParams::unflatten(std::span<const double> flat) {
    if (static_cast<int64_t>(flat.size()) != num_params())
        throw ShapeError("unflatten: length mismatch");
    size_t off = 0;
    for (auto& b : blocks) {
        auto& d = b.tensor.mutable_data();
        std::copy(flat.begin() + off, flat.begin() + off + d.size(), d.begin());
        off += d.size();
    }
}

std::vector<size_t> UNetParams::block_indices(BlockTag tag) const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].tag == tag) idx.push_back(i);
    return idx;
}

void UNetParams::freeze(BlockTag tag) {
    frozen.resize(blocks.size(), false);
    for (size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].tag == tag) frozen[i] = true;
}

UNetParams UNetParams::clone() const {
    UNetParams c;
    c.config = config;
    c.frozen = frozen;
    for (const auto& b : blocks)
        c.blocks.push_back({b.name, b.tag, Tensor::from_data(b.tensor.shape(), b.tensor.data(), true)});
    return c;
}

UNetParams init_params(const UNetConfig& config, uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));  // leaky relu slope 0.2
    UNetParams p;
    p.config = config;
    for (const auto& s : build_specs(config)) {
        std::vector<double> data(static_cast<size_t>(numel(s.shape)));
        if (s.fan_in > 0) {
            const double bound = gain * std::sqrt(3.0 / static_cast<double>(s.fan_in));
            for (double& v : data) v = rng.uniform(-bound, bound);
        } else if (s.fan_in < 0) {
            std::fill(data.begin(), data.end(), 1.0);
        }
        p.blocks.push_back({s.name, s.tag, Tensor::from_data(s.shape, std::move(data), true)});
    }
    p.frozen.assign(p.blocks.size(), false);
    return p;
}

Tensor unet_forward(const UNetParams& params, const Tensor& input) {
    const UNetConfig& cfg = params.config;
    cfg.validate();
    Tensor x = input;
    if (x.rank() == 2) x = reshape(x, {1, x.dim(0), x.dim(1)});
    if (x.rank() != 3 || x.dim(0) != 1)
        throw ShapeError("unet_forward: expected a single-channel image, got " +
                         shape_str(input.shape()));
    const int64_t h = x.dim(1), w = x.dim(2);
    const int64_t div = 1LL << (cfg.scales - 1);
    if (h % div != 0 || w % div != 0)
        throw ShapeError("unet_forward: spatial size " + shape_str({h, w}) +
                         " not divisible by 2^(scales-1) = " + std::to_string(div));

    size_t bi = 0;
    auto next = [&](const std::string& suffix) -> const Tensor& {
        const ParamBlock& b = params.blocks.at(bi);
        if (b.name.size() < suffix.size() ||
            b.name.compare(b.name.size() - suffix.size(), suffix.size(), suffix) != 0)
            throw Error("unet_forward: unexpected block order at '" + b.name + "', wanted '" +
                        suffix + "'");
        ++bi;
        return params.blocks[bi - 1].tensor;
    };
    const int pad = cfg.kernel_size / 2;
    auto unit = [&](Tensor t, int stride) {
        const Tensor& wk = next(".w");
        const Tensor& bk = next(".b");
        t = conv2d(t, wk, bk, stride, pad);
        const Tensor& gk = next(".gain");
        const Tensor& bb = next(".bias");
        t = group_norm(t, cfg.groups, gk, bb);
        return leaky_relu(t, 0.2);
    };

    std::vector<Tensor> enc_out;
    for (int i = 0; i < cfg.scales; ++i) {
        x = unit(x, i == 0 ? 1 : 2);
        x = unit(x, 1);
        enc_out.push_back(x);
    }
    std::vector<Tensor> skips;
    for (int i = 0; i < cfg.scales - 1; ++i) {
        const Tensor& wk = next(".w");
        const Tensor& bk = next(".b");
        skips.push_back(leaky_relu(conv2d(enc_out[i], wk, bk, 1, 0), 0.2));
    }
    for (int i = cfg.scales - 2; i >= 0; --i) {
        x = bilinear_upsample_2x(x);
        x = concat_channels(x, skips[static_cast<size_t>(i)]);
        x = unit(x, 1);
        x = unit(x, 1);
    }
    const Tensor& wk = next(".w");
    const Tensor& bk = next(".b");
    x = conv2d(x, wk, bk, 1, 0);
    if (bi != params.blocks.size()) throw Error("unet_forward: unused parameter blocks");
    return sigmoid(x);
}

namespace {

template <typename T>
void wr(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T rd(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw IoError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const UNetParams& params, const CheckpointMeta& meta) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("EDIPCKPT", 8);
    wr<uint32_t>(f, 1);
    wr<uint64_t>(f, params.config.hash());
    for (int v : {params.config.scales, params.config.channels, params.config.skip_channels,
                  params.config.kernel_size, params.config.groups})
        wr<uint32_t>(f, static_cast<uint32_t>(v));
    wr<uint64_t>(f, meta.epoch);
    wr<uint64_t>(f, meta.seed);
    wr<double>(f, meta.validation_loss);
    wr<uint32_t>(f, static_cast<uint32_t>(params.blocks.size()));
    for (const auto& b : params.blocks) {
        wr<uint32_t>(f, static_cast<uint32_t>(b.name.size()));
        f.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        wr<uint8_t>(f, b.tag == BlockTag::Encoder ? 0 : 1);
        wr<uint32_t>(f, static_cast<uint32_t>(b.tensor.rank()));
        for (int64_t d : b.tensor.shape()) wr<uint64_t>(f, static_cast<uint64_t>(d));
        f.write(reinterpret_cast<const char*>(b.tensor.data().data()),
                static_cast<std::streamsize>(b.tensor.data().size() * sizeof(double)));
    }
    if (!f) throw IoError("write failed: " + path);
}

static Checkpoint load_checkpoint_impl(const std::string& path, const UNetConfig* expected,
                                       bool meta_only) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "EDIPCKPT", 8) != 0) throw IoError("bad checkpoint magic: " + path);
    if (rd<uint32_t>(f, path) != 1) throw IoError("unsupported checkpoint version: " + path);
    const uint64_t stored_hash = rd<uint64_t>(f, path);
    Checkpoint ck;
    ck.params.config.scales = static_cast<int>(rd<uint32_t>(f, path));
    ck.params.config.channels = static_cast<int>(rd<uint32_t>(f, path));
    ck.params.config.skip_channels = static_cast<int>(rd<uint32_t>(f, path));
    ck.params.config.kernel_size = static_cast<int>(rd<uint32_t>(f, path));
    ck.params.config.groups = static_cast<int>(rd<uint32_t>(f, path));
    ck.meta.epoch = rd<uint64_t>(f, path);
    ck.meta.seed = rd<uint64_t>(f, path);
    ck.meta.validation_loss = rd<double>(f, path);
    if (expected && stored_hash != expected->hash())
        throw Error("checkpoint config-hash mismatch: " + path +
                    " was written for a different architecture");
    if (meta_only) return ck;
    const uint32_t nb = rd<uint32_t>(f, path);
    for (uint32_t i = 0; i < nb; ++i) {
        const uint32_t len = rd<uint32_t>(f, path);
        std::string name(len, '\0');
        f.read(name.data(), len);
        const uint8_t tag = rd<uint8_t>(f, path);
        const uint32_t rank = rd<uint32_t>(f, path);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(rd<uint64_t>(f, path));
        std::vector<double> data(static_cast<size_t>(numel(shape)));
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!f) throw IoError("truncated checkpoint: " + path);
        ck.params.blocks.push_back({std::move(name), tag == 0 ? BlockTag::Encoder : BlockTag::Decoder,
                                    Tensor::from_data(std::move(shape), std::move(data), true)});
    }
    ck.params.frozen.assign(ck.params.blocks.size(), false);
    return ck;
}

Checkpoint load_checkpoint(const std::string& path, const UNetConfig& expected) {
    return load_checkpoint_impl(path, &expected, false);
}

CheckpointMeta peek_checkpoint_meta(const std::string& path) {
    return load_checkpoint_impl(path, nullptr, true).meta;
}

}  // namespace edip
