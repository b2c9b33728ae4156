#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include "edip/ops.hpp"
#include "edip/optim.hpp"
#include "edip/rng.hpp"
#include "edip/serialize.hpp"
#include "edip/tensor.hpp"

using namespace edip;

namespace {

// Central finite differences against reverse-mode, sampling coordinates of
// every input. `loss` re-evaluates the scalar from the current input values.
void gradcheck(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs,
               double tol = 1e-5, int max_coords_per_input = 25) {
    std::vector<std::vector<double>> ad;
    {
        Tape tape;
        Tensor l = loss();
        for (auto in : inputs) in.zero_grad();
        tape.backward(l);
        for (const auto& in : inputs) ad.push_back(in.grad());
    }
    auto eval = [&]() {
        NoGradGuard ng;
        return loss().item();
    };
    Rng pick(0xfdc3ULL);
    for (size_t t = 0; t < inputs.size(); ++t) {
        Tensor in = inputs[t];
        const int64_t n = in.numel();
        const int64_t coords = std::min<int64_t>(n, max_coords_per_input);
        for (int64_t c = 0; c < coords; ++c) {
            const size_t i = coords == n ? static_cast<size_t>(c)
                                         : static_cast<size_t>(pick.integer(static_cast<uint64_t>(n)));
            const double x0 = in.mutable_data()[i];
            const double h = 1e-6 * (1.0 + std::abs(x0));
            in.mutable_data()[i] = x0 + h;
            const double fp = eval();
            in.mutable_data()[i] = x0 - h;
            const double fm = eval();
            in.mutable_data()[i] = x0;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = ad[t][i];
            const double denom = std::max({std::abs(fd), std::abs(a), 1e-6});
            INFO("input ", t, " coord ", i, " fd=", fd, " ad=", a);
            CHECK(std::abs(fd - a) / denom < tol);
        }
    }
}

Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
    std::vector<double> d(static_cast<size_t>(numel(s)));
    for (double& v : d) v = scale * rng.normal();
    return Tensor::from_data(std::move(s), std::move(d), true);
}

// weighted sum makes any op output a scalar with a non-trivial cotangent
Tensor pool(const Tensor& t, const Tensor& w) { return sum(mul(reshape(t, {t.numel()}), w)); }

Tensor weights(int64_t n, Rng& rng) {
    std::vector<double> d(static_cast<size_t>(n));
    for (double& v : d) v = rng.normal();
    return Tensor::from_data({n}, std::move(d));
}

}  // namespace

TEST_CASE("rng streams are pinned to the mt19937_64 reference") {
    Rng r(42);
    // frozen from an independent mt19937_64 implementation
    CHECK(r.uniform() == doctest::Approx(0.755155532954539).epsilon(1e-15));
    CHECK(r.uniform() == doctest::Approx(0.6390313938546974).epsilon(1e-15));
    CHECK(r.uniform() == doctest::Approx(0.7521452007480266).epsilon(1e-15));
    Rng r2(42);
    CHECK(r2.normal() == doctest::Approx(-0.481217699801845).epsilon(1e-12));
    CHECK(r2.normal() == doctest::Approx(0.4945838562352136).epsilon(1e-12));
    CHECK(r2.normal() == doctest::Approx(0.3745542688498138).epsilon(1e-12));
}

TEST_CASE("tensor construction and shape errors") {
    CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.0, 2.0}), ShapeError);
    Tensor t = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK_THROWS_AS(t.item(), ShapeError);
    CHECK(Tensor::scalar(7.0).item() == 7.0);
}

TEST_CASE("backward of theta^2 at 3 gives 6") {
    Tape tape;
    Tensor x = Tensor::from_data({1}, {3.0}, true);
    Tensor y = mul(x, x);
    tape.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar outputs") {
    Tape tape;
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("matmul loss gradient matches the analytic normal-equations formula") {
    Rng rng(7);
    const int64_t m = 5, k = 7;
    Tensor M = randn({m, k}, rng);
    Tensor theta = randn({k, 1}, rng);
    Tensor y = randn({m, 1}, rng);
    Tape tape;
    Tensor r = sub(matmul(M, theta), y);
    Tensor loss = l2_norm_sq(r);
    theta.zero_grad();
    tape.backward(loss);
    // 2 M^T (M theta - y), computed without the tape
    for (int64_t j = 0; j < k; ++j) {
        double g = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            double ri = -y.data()[i];
            for (int64_t l = 0; l < k; ++l) ri += M.data()[i * k + l] * theta.data()[l];
            g += 2.0 * M.data()[i * k + j] * ri;
        }
        CHECK(theta.grad()[j] == doctest::Approx(g).epsilon(1e-10));
    }
}

TEST_CASE("gradcheck: elementwise and reduction primitives") {
    Rng rng(11);
    Tensor a = randn({3, 4}, rng), b = randn({3, 4}, rng);
    Tensor w = weights(12, rng);
    gradcheck([&] { return pool(add(a, b), w); }, {a, b});
    gradcheck([&] { return pool(sub(a, b), w); }, {a, b});
    gradcheck([&] { return pool(mul(a, b), w); }, {a, b});
    gradcheck([&] { return pool(scale(a, -1.7), w); }, {a});
    gradcheck([&] { return pool(add_scalar(a, 0.3), w); }, {a});
    gradcheck([&] { return l2_norm_sq(a); }, {a});
    gradcheck([&] { return mean(a); }, {a});
    gradcheck([&] { return sum(a); }, {a});
    gradcheck([&] { return sigmoid(sum(mul(a, b))); }, {a, b});
}

TEST_CASE("gradcheck: matmul") {
    Rng rng(12);
    Tensor a = randn({4, 6}, rng), b = randn({6, 3}, rng);
    Tensor w = weights(12, rng);
    gradcheck([&] { return pool(matmul(a, b), w); }, {a, b});
}

TEST_CASE("gradcheck: conv2d stride 1 and stride 2") {
    Rng rng(13);
    Tensor x = randn({2, 6, 6}, rng);
    Tensor k = randn({3, 2, 3, 3}, rng);
    Tensor bias = randn({3}, rng);
    {
        Tensor w = weights(3 * 6 * 6, rng);
        gradcheck([&] { return pool(conv2d(x, k, bias, 1, 1), w); }, {x, k, bias});
    }
    {
        Tensor w = weights(3 * 3 * 3, rng);
        gradcheck([&] { return pool(conv2d(x, k, bias, 2, 1), w); }, {x, k, bias});
    }
}

TEST_CASE("gradcheck: upsample, activations, group norm, concat, diffs") {
    Rng rng(14);
    Tensor x = randn({2, 4, 4}, rng);
    {
        Tensor w = weights(2 * 8 * 8, rng);
        gradcheck([&] { return pool(bilinear_upsample_2x(x), w); }, {x});
    }
    {
        // keep values away from the leaky-relu kink
        Tensor y = Tensor::from_data({2, 2}, {-1.3, 0.7, 2.1, -0.4}, true);
        Tensor w = weights(4, rng);
        gradcheck([&] { return pool(leaky_relu(y, 0.2), w); }, {y});
        gradcheck([&] { return pool(sigmoid(y), w); }, {y});
    }
    {
        Tensor gain = randn({2}, rng), bias = randn({2}, rng);
        Tensor w = weights(2 * 4 * 4, rng);
        gradcheck([&] { return pool(group_norm(x, 2, gain, bias), w); }, {x, gain, bias}, 2e-5);
        gradcheck([&] { return pool(group_norm(x, 1, gain, bias), w); }, {x, gain, bias}, 2e-5);
    }
    {
        Tensor b2 = randn({3, 4, 4}, rng);
        Tensor w = weights(5 * 4 * 4, rng);
        gradcheck([&] { return pool(concat_channels(x, b2), w); }, {x, b2});
    }
    {
        Tensor w1 = weights(4 * 3, rng), w2 = weights(3 * 4, rng);
        Tensor img = randn({4, 4}, rng);
        gradcheck([&] { return pool(diff_h(img), w1); }, {img});
        gradcheck([&] { return pool(diff_v(img), w2); }, {img});
        // l1 kink avoided: diffs of distinct random normals are far from zero
        gradcheck([&] { return l1_norm(diff_h(img)); }, {img});
    }
}

TEST_CASE("conv2d with a 1x1 identity kernel reproduces the image") {
    Tensor x = Tensor::from_data({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor k = Tensor::from_data({1, 1, 1, 1}, {1.0});
    Tensor out = conv2d(x, k, Tensor(), 1, 0);
    for (size_t i = 0; i < 9; ++i) CHECK(out.data()[i] == x.data()[i]);
}

TEST_CASE("leaky_relu fixture") {
    Tensor x = Tensor::from_data({2}, {-1.0, 2.0});
    Tensor y = leaky_relu(x, 0.2);
    CHECK(y.data()[0] == doctest::Approx(-0.2));
    CHECK(y.data()[1] == doctest::Approx(2.0));
}

TEST_CASE("group_norm of a constant group is zero before gain/bias") {
    Tensor x = Tensor::full({2, 3, 3}, 5.0);
    Tensor gain = Tensor::full({2}, 1.0);
    Tensor bias = Tensor::zeros({2});
    Tensor y = group_norm(x, 2, gain, bias);
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("linearity of backward: grad(a f + b g) = a grad f + b grad g") {
    Rng rng(21);
    Tensor x = randn({5}, rng);
    auto grad_of = [&](double a, double b) {
        Tape tape;
        Tensor f = l2_norm_sq(x);
        Tensor g = sum(mul(x, x));  // different graph, same leaves
        Tensor combo = add(scale(f, a), scale(g, b));
        x.zero_grad();
        tape.backward(combo);
        return x.grad();
    };
    auto g10 = grad_of(1, 0), g01 = grad_of(0, 1), g23 = grad_of(2, 3);
    for (size_t i = 0; i < 5; ++i)
        CHECK(g23[i] == doctest::Approx(2 * g10[i] + 3 * g01[i]).epsilon(1e-12));
}

TEST_CASE("forward evaluation is bit-deterministic") {
    Rng r1(33), r2(33);
    Tensor a1 = randn({4, 4, 4}, r1), a2 = randn({4, 4, 4}, r2);
    Tensor k1 = randn({2, 4, 3, 3}, r1), k2 = randn({2, 4, 3, 3}, r2);
    Tensor c1 = conv2d(a1, k1, Tensor(), 1, 1);
    Tensor c2 = conv2d(a2, k2, Tensor(), 1, 1);
    REQUIRE(c1.numel() == c2.numel());
    for (int64_t i = 0; i < c1.numel(); ++i) CHECK(c1.data()[i] == c2.data()[i]);
}

TEST_CASE("NoGradGuard suppresses recording") {
    Tape tape;
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    const size_t before = tape.size();
    {
        NoGradGuard ng;
        Tensor y = mul(x, x);
        (void)y;
    }
    CHECK(tape.size() == before);
}

TEST_CASE("adam: hand-computed traces on a 3-parameter quadratic") {
    auto run = [](int steps) {
        std::vector<double> x = {1.0, -2.0, 3.0};
        AdamState st(3, LearningRateSchedule::constant(0.1));
        for (int s = 0; s < steps; ++s) {
            std::vector<double> g = {2 * x[0], 2 * x[1], 2 * x[2]};
            adam_step(x, g, st, "quad");
        }
        return x;
    };
    // frozen from an independent Adam recurrence computation
    auto x2 = run(2);
    CHECK(x2[0] == doctest::Approx(0.8004122286917928).epsilon(1e-12));
    CHECK(x2[1] == doctest::Approx(-1.8001664861157012).epsilon(1e-12));
    CHECK(x2[2] == doctest::Approx(2.800102707414789).epsilon(1e-12));
    auto x5 = run(5);
    CHECK(x5[0] == doctest::Approx(0.507963659264342).epsilon(1e-12));
    CHECK(x5[1] == doctest::Approx(-1.5029557812950123).epsilon(1e-12));
    CHECK(x5[2] == doctest::Approx(2.501779456227287).epsilon(1e-12));
}

TEST_CASE("adam: first step magnitude, zero gradient, and error reporting") {
    {
        std::vector<double> x = {1.0};
        AdamState st(1, LearningRateSchedule::constant(0.05));
        std::vector<double> g = {0.3};
        adam_step(x, g, st, "b");
        CHECK(x[0] == doctest::Approx(1.0 - 0.05 * 0.3 / (0.3 + 1e-8)).epsilon(1e-8));
    }
    {
        std::vector<double> x = {1.0, 2.0};
        AdamState st(2, LearningRateSchedule::constant(0.05));
        std::vector<double> g = {0.0, 0.0};
        adam_step(x, g, st, "b");
        CHECK(x[0] == 1.0);
        CHECK(x[1] == 2.0);
    }
    {
        std::vector<double> x = {1.0};
        AdamState st(1, LearningRateSchedule::constant(0.05));
        std::vector<double> g = {std::numeric_limits<double>::quiet_NaN()};
        CHECK_THROWS_WITH_AS(adam_step(x, g, st, "enc0.conv"),
                             doctest::Contains("enc0.conv"), Error);
    }
}

TEST_CASE("learning rate schedules") {
    auto c = LearningRateSchedule::constant(1e-4);
    CHECK(c.lr(0) == 1e-4);
    CHECK(c.lr(100000) == 1e-4);
    auto w = LearningRateSchedule::linear_warmdown(5e-4, 1e-4, 5000);
    CHECK(w.lr(0) == doctest::Approx(5e-4));
    CHECK(w.lr(2500) == doctest::Approx(3e-4));
    CHECK(w.lr(5000) == doctest::Approx(1e-4));
    CHECK(w.lr(10000) == doctest::Approx(1e-4));
}

TEST_CASE("tensor binary round-trip") {
    const std::string path = "tmp_tensor_roundtrip.edipt";
    Rng rng(5);
    Tensor t = randn({3, 5, 2}, rng);
    save_tensor(path, t);
    Tensor u = load_tensor(path);
    REQUIRE(u.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(u.data()[i] == t.data()[i]);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_tensor("does_not_exist.edipt"), IoError);
}

TEST_CASE("sparse CSR round-trip and transpose") {
    SparseCsr m;
    m.rows = 2;
    m.cols = 3;
    m.row_offsets = {0, 2, 3};
    m.col_indices = {0, 2, 1};
    m.values = {1.5, -2.0, 4.0};
    const std::string path = "tmp_csr_roundtrip.edipcsr";
    save_csr(path, m);
    SparseCsr u = load_csr(path);
    CHECK(u.rows == 2);
    CHECK(u.values == m.values);
    SparseCsr t = m.transposed();
    CHECK(t.rows == 3);
    CHECK(t.cols == 2);
    // (0,0)=1.5 -> t(0,0); (0,2)=-2 -> t(2,0); (1,1)=4 -> t(1,1)
    std::vector<double> x = {1.0, 1.0};
    std::vector<double> y(3);
    t.matvec(x.data(), y.data());
    CHECK(y[0] == 1.5);
    CHECK(y[1] == 4.0);
    CHECK(y[2] == -2.0);
    std::filesystem::remove(path);
}
