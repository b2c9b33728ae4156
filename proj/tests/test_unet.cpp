#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>
#include <vector>

#include "edip/error.hpp"
#include "edip/rng.hpp"
#include "edip/unet.hpp"

using namespace edip;

namespace {

UNetConfig tiny() {
    UNetConfig c;
    c.scales = 2;
    c.channels = 6;
    c.skip_channels = 2;
    c.groups = 2;
    return c;
}

Tensor noise_input(int64_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> d(static_cast<size_t>(n * n));
    for (double& v : d) v = 0.1 * rng.uniform();
    return Tensor::from_data({1, n, n}, std::move(d));
}

}  // namespace

TEST_CASE("closed-form parameter counts match materialized parameters") {
    struct Case {
        UNetConfig cfg;
        int64_t count;
    };
    UNetConfig full;  // defaults: 4 scales, 32 channels, 4 skip
    UNetConfig mid = full;
    mid.scales = 3;
    UNetConfig t8 = tiny();
    t8.channels = 8;
    t8.skip_channels = 4;
    // frozen from an independent layer-by-layer count
    for (const Case& c : {Case{full, 125325}, Case{mid, 86793}, Case{tiny(), 1911},
                          Case{t8, 3429}}) {
        CHECK(unet_param_count(c.cfg) == c.count);
        UNetParams p = init_params(c.cfg, 0);
        CHECK(p.num_params() == c.count);
        CHECK(static_cast<int64_t>(p.flatten().size()) == c.count);
    }
}

TEST_CASE("config validation") {
    UNetConfig c = tiny();
    c.groups = 4;  // does not divide channels=6
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny();
    c.scales = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny();
    c.kernel_size = 4;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("init: deterministic in the seed, unit gains, zero biases") {
    UNetParams a = init_params(tiny(), 7);
    UNetParams b = init_params(tiny(), 7);
    CHECK(a.flatten() == b.flatten());
    UNetParams c = init_params(tiny(), 8);
    CHECK(a.flatten() != c.flatten());
    for (const ParamBlock& blk : a.blocks) {
        if (blk.name.ends_with(".gain")) {
            for (double v : blk.tensor.data()) CHECK(v == 1.0);
        } else if (blk.name.ends_with(".b") || blk.name.ends_with(".bias")) {
            for (double v : blk.tensor.data()) CHECK(v == 0.0);
        } else {
            double mx = 0.0;
            for (double v : blk.tensor.data()) mx = std::max(mx, std::abs(v));
            CHECK(mx > 0.0);  // weights actually randomized
        }
    }
}

TEST_CASE("encoder/decoder partition is disjoint and exhaustive") {
    UNetParams p = init_params(tiny(), 3);
    auto enc = p.block_indices(BlockTag::Encoder);
    auto dec = p.block_indices(BlockTag::Decoder);
    std::set<size_t> all(enc.begin(), enc.end());
    for (size_t i : dec) {
        CHECK(!all.count(i));
        all.insert(i);
    }
    CHECK(all.size() == p.blocks.size());
    CHECK(!enc.empty());
    CHECK(!dec.empty());
    // skip projections and the output head belong to the decoder
    for (const ParamBlock& b : p.blocks)
        if (b.name.starts_with("skip") || b.name.starts_with("out"))
            CHECK(b.tag == BlockTag::Decoder);
}

TEST_CASE("freeze marks exactly the requested partition") {
    UNetParams p = init_params(tiny(), 3);
    p.freeze(BlockTag::Encoder);
    for (size_t i = 0; i < p.blocks.size(); ++i)
        CHECK(p.frozen[i] == (p.blocks[i].tag == BlockTag::Encoder));
}

TEST_CASE("forward: shape, open range (0,1), determinism, size guard") {
    UNetParams p = init_params(tiny(), 5);
    Tensor z = noise_input(16, 9);
    Tensor y1 = unet_forward(p, z);
    CHECK(y1.shape() == Shape{1, 16, 16});
    for (double v : y1.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    Tensor y2 = unet_forward(p, z);
    CHECK(y1.data() == y2.data());
    // odd size not divisible by 2^(scales-1)
    CHECK_THROWS_AS(unet_forward(p, noise_input(15, 9)), Error);
}

TEST_CASE("flatten/unflatten round-trip") {
    UNetParams p = init_params(tiny(), 5);
    auto flat = p.flatten();
    UNetParams q = init_params(tiny(), 6);
    q.unflatten(flat);
    CHECK(q.flatten() == flat);
    flat.pop_back();
    CHECK_THROWS_AS(q.unflatten(flat), Error);
}

TEST_CASE("checkpoint round-trip and config-hash guard") {
    const std::string path = "tmp_unet_ckpt.edipc";
    UNetParams p = init_params(tiny(), 12);
    CheckpointMeta meta;
    meta.epoch = 17;
    meta.seed = 12;
    meta.validation_loss = 0.0325;
    save_checkpoint(path, p, meta);
    Checkpoint ck = load_checkpoint(path, tiny());
    CHECK(ck.params.flatten() == p.flatten());
    CHECK(ck.meta.epoch == 17);
    CHECK(ck.meta.seed == 12);
    CHECK(ck.meta.validation_loss == 0.0325);
    CHECK(peek_checkpoint_meta(path).epoch == 17);
    UNetConfig other = tiny();
    other.channels = 8;
    other.skip_channels = 4;
    CHECK_THROWS_AS(load_checkpoint(path, other), Error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path, tiny()), IoError);
}
