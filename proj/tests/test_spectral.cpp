#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "edip/error.hpp"
#include "edip/linalg.hpp"
#include "edip/phantoms.hpp"
#include "edip/rng.hpp"
#include "edip/spectral.hpp"

using namespace edip;

namespace {

Matrix random_matrix(int64_t r, int64_t c, uint64_t seed) {
    Matrix m(r, c);
    Rng rng(seed);
    for (double& v : m.a) v = rng.normal();
    return m;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    std::vector<double> y(static_cast<size_t>(m.rows), 0.0);
    for (int64_t i = 0; i < m.rows; ++i)
        for (int64_t j = 0; j < m.cols; ++j) y[i] += m.at(i, j) * x[j];
    return y;
}

std::vector<double> matvec_t(const Matrix& m, std::span<const double> y) {
    std::vector<double> x(static_cast<size_t>(m.cols), 0.0);
    for (int64_t i = 0; i < m.rows; ++i)
        for (int64_t j = 0; j < m.cols; ++j) x[j] += m.at(i, j) * y[i];
    return x;
}

RayTransform tiny_op() {
    FanBeamGeometry g;
    g.image_size = 16;
    g.angles = FanBeamGeometry::uniform_angles(10, 0.0, 2.0 * M_PI);
    g.num_detector_pixels = 40;  // m = 400
    return RayTransform(g);
}

UNetConfig tiny_arch() {
    UNetConfig c;
    c.scales = 2;
    c.channels = 6;
    c.skip_channels = 2;
    c.groups = 2;
    return c;
}

}  // namespace

TEST_CASE("householder_q: orthonormal columns spanning the input range") {
    Matrix m = random_matrix(12, 5, 1);
    Matrix q = householder_q(m);
    REQUIRE(q.rows == 12);
    REQUIRE(q.cols == 5);
    for (int64_t i = 0; i < 5; ++i)
        for (int64_t j = 0; j < 5; ++j) {
            double d = 0.0;
            for (int64_t r = 0; r < 12; ++r) d += q.at(r, i) * q.at(r, j);
            CHECK(std::abs(d - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
    // Q Q^T m == m (columns of m lie in span Q)
    for (int64_t c = 0; c < 5; ++c) {
        std::vector<double> col(12);
        for (int64_t r = 0; r < 12; ++r) col[r] = m.at(r, c);
        std::vector<double> proj(12, 0.0);
        for (int64_t i = 0; i < 5; ++i) {
            double d = 0.0;
            for (int64_t r = 0; r < 12; ++r) d += q.at(r, i) * col[r];
            for (int64_t r = 0; r < 12; ++r) proj[r] += q.at(r, i) * d;
        }
        for (int64_t r = 0; r < 12; ++r) CHECK(proj[r] == doctest::Approx(col[r]).epsilon(1e-10));
    }
}

TEST_CASE("householder_q rejects rank-deficient input") {
    Matrix m = random_matrix(10, 4, 2);
    for (int64_t r = 0; r < 10; ++r) m.at(r, 3) = 2.0 * m.at(r, 1);  // dependent column
    CHECK_THROWS_AS(householder_q(m), Error);
}

TEST_CASE("jacobi_eigh on a 2x2 with known spectrum") {
    Matrix s(2, 2);
    s.at(0, 0) = 2;
    s.at(0, 1) = 1;
    s.at(1, 0) = 1;
    s.at(1, 1) = 2;
    std::vector<double> ev;
    Matrix vec;
    jacobi_eigh(s, ev, vec);
    CHECK(ev[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(ev[1] == doctest::Approx(1.0).epsilon(1e-14));
    // eigenvector for 3 is (1,1)/sqrt2 up to sign
    CHECK(std::abs(vec.at(0, 0)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(vec.at(0, 0) == doctest::Approx(vec.at(1, 0)).epsilon(1e-12));
}

TEST_CASE("dense_svd matches the frozen oracle on a 6x4 integer matrix") {
    Matrix m(6, 4);
    for (int64_t i = 0; i < 6; ++i)
        for (int64_t j = 0; j < 4; ++j) m.at(i, j) = static_cast<double>((3 * i + 5 * j) % 11) - 5.0;
    // frozen from an independent SVD computation
    const std::vector<double> expect = {10.80679926863834, 7.822007836058693, 6.484440552790447,
                                        4.240437913390662};
    for (const Matrix& mm : {m, transpose(m)}) {
        Matrix vt;
        auto sigma = dense_svd(mm, &vt);
        REQUIRE(sigma.size() == 4);
        for (size_t k = 0; k < 4; ++k)
            CHECK(sigma[k] == doctest::Approx(expect[k]).epsilon(1e-10));
        // right vectors: M^T M v = sigma^2 v, unit norm
        for (int64_t k = 0; k < vt.rows; ++k) {
            std::vector<double> v(static_cast<size_t>(vt.cols));
            double nrm = 0.0;
            for (int64_t j = 0; j < vt.cols; ++j) {
                v[j] = vt.at(k, j);
                nrm += v[j] * v[j];
            }
            CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-10));
            auto mtmv = matvec_t(mm, matvec(mm, v));
            for (int64_t j = 0; j < vt.cols; ++j)
                CHECK(mtmv[j] == doctest::Approx(sigma[k] * sigma[k] * v[j]).epsilon(1e-8));
        }
    }
}

TEST_CASE("net_jvp/net_vjp: adjoint consistency and FD column vs backprop row") {
    RayTransform op = tiny_op();
    UNetParams params = init_params(tiny_arch(), 3);
    auto input = test_phantom("rings-and-texture", 16);
    const int64_t p = params.num_params();
    const int64_t m = op.geometry().num_rays();
    Rng rng(5);

    std::vector<double> theta = params.flatten();
    double tn = 0.0;
    for (double t : theta) tn += t * t;
    tn = std::sqrt(tn);

    std::vector<double> omega(static_cast<size_t>(p)), q(static_cast<size_t>(m));
    for (double& v : omega) v = rng.normal();
    for (double& v : q) v = rng.normal();
    double on = 0.0;
    for (double v : omega) on += v * v;
    // A small step keeps theta +/- eps*omega on the same smooth piece of the
    // leaky-relu network; larger steps cross an activation kink near this
    // parameter point and the central difference stops being quadratic.
    const double eps = 1e-5 * (1.0 + tn) / std::sqrt(on);

    auto ju = net_jvp(params, input, op, omega, eps);
    auto vq = net_vjp(params, input, op, q);
    double lhs = 0.0, rhs = 0.0;
    for (int64_t i = 0; i < m; ++i) lhs += ju[i] * q[i];
    for (int64_t i = 0; i < p; ++i) rhs += omega[i] * vq[i];
    CHECK(std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)) < 1e-4);

    // zero cotangent
    std::vector<double> zq(static_cast<size_t>(m), 0.0);
    for (double v : net_vjp(params, input, op, zq)) CHECK(v == 0.0);

    // homogeneity: jvp(2w) = 2 jvp(w) up to O(eps^2) truncation
    std::vector<double> omega2(omega);
    for (double& v : omega2) v *= 2.0;
    auto ju2 = net_jvp(params, input, op, omega2, eps / 2.0);
    for (int64_t i = 0; i < m; ++i)
        CHECK(ju2[i] == doctest::Approx(2.0 * ju[i]).epsilon(1e-5));

    // single-bias unit direction: FD column matches the backprop Jacobian row
    size_t bias_off = 0;
    for (const auto& b : params.blocks) {
        if (b.name == "out.conv.b") break;
        bias_off += b.tensor.data().size();
    }
    std::vector<double> e(static_cast<size_t>(p), 0.0);
    e[bias_off] = 1.0;
    auto col = net_jvp(params, input, op, e, 1e-3 * (1.0 + tn));
    for (int64_t i = 0; i < m; ++i) {
        std::vector<double> ei(static_cast<size_t>(m), 0.0);
        ei[i] = 1.0;
        if (i % 37 != 0) continue;  // spot-check rows
        auto row = net_vjp(params, input, op, ei);
        const double denom = std::max({std::abs(col[i]), std::abs(row[bias_off]), 1e-8});
        CHECK(std::abs(col[i] - row[bias_off]) / denom < 1e-4);
    }
}

TEST_CASE("rsvd on a 20x35 linear surrogate matches the dense SVD to 1e-6") {
    const int64_t m = 20, p = 35;
    Matrix M = random_matrix(m, p, 7);
    JvpFn jvp = [&](std::span<const double> w, double) { return matvec(M, w); };
    VjpFn vjp = [&](std::span<const double> q) { return matvec_t(M, q); };
    BlockLayout layout{{"enc", "dec"}, {15, 20}, {"encoder", "decoder"}};
    RsvdConfig cfg;
    // probes cover the full rank of M, so the sketch is exact
    cfg.rank = 15;
    cfg.oversampling = 5;
    cfg.probe_seed = 1;
    SpectralReport rep = rsvd_linop(m, p, jvp, vjp, layout, 1.0, cfg);
    auto dense = dense_svd(M);
    REQUIRE(rep.singular_values.size() == 15);
    for (size_t k = 0; k < 15; ++k) {
        CHECK(rep.singular_values[k] >= 0.0);
        if (k > 0) CHECK(rep.singular_values[k] <= rep.singular_values[k - 1]);
        CHECK(std::abs(rep.singular_values[k] - dense[k]) / dense[k] < 1e-6);
    }
    // probe-seed invariance
    cfg.probe_seed = 99;
    SpectralReport rep2 = rsvd_linop(m, p, jvp, vjp, layout, 1.0, cfg);
    for (size_t k = 0; k < 15; ++k)
        CHECK(std::abs(rep2.singular_values[k] - rep.singular_values[k]) / dense[k] < 1e-6);
    // block-mass rows sum to 1; unit right-singular-vector norms
    for (int64_t k = 0; k < 15; ++k) {
        double s = rep.block_mass.at(k, 0) + rep.block_mass.at(k, 1);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
        double nrm = 0.0;
        for (int64_t j = 0; j < p; ++j) nrm += rep.right_singular_vectors.at(k, j) *
                                               rep.right_singular_vectors.at(k, j);
        CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-10));
    }
    // config validation
    RsvdConfig bad = cfg;
    bad.rank = 30;  // rank + oversampling > m
    CHECK_THROWS_AS(rsvd_linop(m, p, jvp, vjp, layout, 1.0, bad), Error);
}

TEST_CASE("block_histogram: decoder-supported vectors give decoder mass 1") {
    SpectralReport rep;
    rep.singular_values = {3.0, 2.0, 1.0, 0.5};
    rep.block_names = {"enc0", "dec0"};
    rep.block_sizes = {3, 3};
    rep.block_tags = {"encoder", "decoder"};
    rep.right_singular_vectors = Matrix(4, 6);
    rep.block_mass = Matrix(4, 2);
    rep.hoyer_per_vector = {0.9, 0.8, 0.2, 0.1};
    for (int64_t k = 0; k < 4; ++k) {
        const bool dec = k < 2;  // leading two live on the decoder
        rep.block_mass.at(k, 0) = dec ? 0.0 : 1.0;
        rep.block_mass.at(k, 1) = dec ? 1.0 : 0.0;
    }
    BlockMassSummary s = block_histogram(rep, 2);
    CHECK(s.leading_decoder_mass == doctest::Approx(1.0));
    CHECK(s.leading_encoder_mass == doctest::Approx(0.0));
    CHECK(s.trailing_encoder_mass == doctest::Approx(1.0));
    CHECK(s.leading_mean_hoyer == doctest::Approx(0.85));
    CHECK(s.trailing_mean_hoyer == doctest::Approx(0.15));
}

TEST_CASE("rsvd on a tiny U-Net matches the explicit Jacobian SVD on the top 20") {
    RayTransform op = tiny_op();
    UNetParams params = init_params(tiny_arch(), 11);
    auto input = test_phantom("rings-and-texture", 16);
    const int64_t p = params.num_params();
    const int64_t m = op.geometry().num_rays();
    REQUIRE(p == 1911);
    REQUIRE(m == 400);

    // explicit Jacobian, one row per unit cotangent
    Matrix jac(m, p);
    std::vector<double> e(static_cast<size_t>(m), 0.0);
    for (int64_t i = 0; i < m; ++i) {
        e[i] = 1.0;
        auto row = net_vjp(params, input, op, e);
        e[i] = 0.0;
        std::copy(row.begin(), row.end(), jac.a.begin() + i * p);
    }
    auto dense = dense_svd(jac);

    RsvdConfig cfg;
    cfg.rank = 50;
    cfg.oversampling = 150;  // slow spectral decay needs a generous sketch
    cfg.probe_seed = 0;
    SpectralReport rep = rsvd(params, input, op, cfg);
    for (size_t k = 0; k < 20; ++k)
        CHECK(std::abs(rep.singular_values[k] - dense[k]) / dense[k] < 1e-2);
    for (size_t k = 1; k < rep.singular_values.size(); ++k)
        CHECK(rep.singular_values[k] <= rep.singular_values[k - 1]);
}
