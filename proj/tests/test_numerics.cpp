// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pointy/gradcheck.hpp"
#include "pointy/nn.hpp"
#include "pointy/rng.hpp"
#include "pointy/tensor.hpp"

using namespace pointy;

namespace {

Tensor<double> random_tensor(std::vector<std::int64_t> shape, Rng& rng, double scale = 1.0) {
    std::int64_t count = 1;
    for (auto e : shape) count *= e;
    std::vector<double> data(static_cast<std::size_t>(count));
    for (auto& v : data) v = rng.normal(0.0, scale);
    return Tensor<double>::from(std::move(shape), std::move(data));
}

Tensor<double> random_param(std::vector<std::int64_t> shape, Rng& rng, const std::string& name, double scale = 1.0) {
    std::int64_t count = 1;
    for (auto e : shape) count *= e;
    std::vector<double> data(static_cast<std::size_t>(count));
    for (auto& v : data) v = rng.normal(0.0, scale);
    return Tensor<double>::param(std::move(shape), std::move(data), name);
}

// reference oracle: naive triple loop
std::vector<double> matmul_reference(const std::vector<double>& a, const std::vector<double>& b, std::int64_t m,
                                     std::int64_t p, std::int64_t n) {
    std::vector<double> c(static_cast<std::size_t>(m * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            for (std::int64_t t = 0; t < p; ++t) {
                c[static_cast<std::size_t>(i * n + j)] +=
                    a[static_cast<std::size_t>(i * p + t)] * b[static_cast<std::size_t>(t * n + j)];
            }
        }
    }
    return c;
}

// weights the output with a fixed random leaf so the loss has no
// accidental symmetry, then sums; deterministic across calls
Tensor<double> weighted_sum(const Tensor<double>& out, std::uint64_t seed = 99) {
    std::vector<double> w(out.data().size());
    Rng local(seed);
    for (auto& v : w) v = local.normal(0.0, 1.0);
    return sum_all(mul(out, Tensor<double>::from(out.shape(), std::move(w))));
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
    auto eye = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    auto a = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto c = matmul(eye, a);
    CHECK(c.data() == std::vector<double>{1, 2, 3, 4});

    auto b = Tensor<double>::from({2, 1}, {5, 6});
    auto d = matmul(a, b);
    CHECK(d.data() == std::vector<double>{17, 39});
}

TEST_CASE("matmul matches the triple-loop oracle") {
    Rng rng(7);
    auto a = random_tensor({7, 5}, rng);
    auto b = random_tensor({5, 3}, rng);
    auto c = matmul(a, b);
    const auto ref = matmul_reference(a.data(), b.data(), 7, 5, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(std::abs(c.data()[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("matmul oracle equivalence across shapes up to 32x32") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto m = static_cast<std::int64_t>(1 + rng.next_below(32));
        const auto p = static_cast<std::int64_t>(1 + rng.next_below(32));
        const auto n = static_cast<std::int64_t>(1 + rng.next_below(32));
        auto a = random_tensor({m, p}, rng);
        auto b = random_tensor({p, n}, rng);
        auto c = matmul(a, b);
        const auto ref = matmul_reference(a.data(), b.data(), m, p, n);
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(c.data()[i] - ref[i]));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    auto a = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(2x3)") != std::string::npos);
        CHECK(msg.find("(2x2)") != std::string::npos);
    }
}

TEST_CASE("gelu and relu point values") {
    auto z = gelu(Tensor<double>::scalar(0.0));
    CHECK(z.item() == 0.0);
    CHECK(relu(Tensor<double>::scalar(-3.0)).item() == 0.0);
    CHECK(relu(Tensor<double>::scalar(3.0)).item() == 3.0);
    // exact CDF form: gelu(1) = 1 * Phi(1)
    const double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
    CHECK(gelu(Tensor<double>::scalar(1.0)).item() == doctest::Approx(phi1).epsilon(1e-12));
}

TEST_CASE("gelu gradient matches central differences at 0.5") {
    auto x = Tensor<double>::param({1}, {0.5}, "x");
    auto loss = sum_all(gelu(x));
    loss.backward();
    const double analytic = x.grad()[0];
    const double h = 1e-6;
    auto f = [](double v) {
        return v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
    };
    const double numeric = (f(0.5 + h) - f(0.5 - h)) / (2.0 * h);
    CHECK(std::abs(analytic - numeric) <= 1e-6);
}

TEST_CASE("softmax symmetry, stabilization, row sums") {
    auto u = softmax(Tensor<double>::from({1, 3}, {0, 0, 0}), 1);
    for (const auto v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    auto big = softmax(Tensor<double>::from({1, 2}, {1000, 1000}), 1);
    CHECK(big.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(big.data()[1] == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(3);
    auto x = random_tensor({4, 6}, rng, 3.0);
    auto y = softmax(x, 1);
    for (std::int64_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::int64_t j = 0; j < 6; ++j) {
            const double v = y.data()[static_cast<std::size_t>(i * 6 + j)];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    auto y0 = softmax(x, 0);
    for (std::int64_t j = 0; j < 6; ++j) {
        double sum = 0.0;
        for (std::int64_t i = 0; i < 4; ++i) sum += y0.data()[static_cast<std::size_t>(i * 6 + j)];
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("layer_norm zero-variance and output statistics") {
    LayerNormLayer<double> ln(5, "ln");
    auto constant = Tensor<double>::from({1, 5}, {3, 3, 3, 3, 3});
    auto out = ln.forward(constant);
    for (const auto v : out.data()) CHECK(v == 0.0);

    Rng rng(5);
    LayerNormLayer<double> ln64(64, "ln64");
    auto x = random_tensor({8, 64}, rng, 6.0);  // variance >> eps keeps the 1e-6 bound eps-limited
    auto y = ln64.forward(x);
    for (std::int64_t i = 0; i < 8; ++i) {
        double mean = 0.0;
        for (std::int64_t j = 0; j < 64; ++j) mean += y.data()[static_cast<std::size_t>(i * 64 + j)];
        mean /= 64.0;
        double var = 0.0;
        for (std::int64_t j = 0; j < 64; ++j) {
            const double c = y.data()[static_cast<std::size_t>(i * 64 + j)] - mean;
            var += c * c;
        }
        var /= 64.0;
        CHECK(std::abs(mean) <= 1e-10);
        CHECK(std::abs(var - 1.0) <= 1e-6);
    }
}

TEST_CASE("layer_norm gradient vs finite differences") {
    Rng rng(9);
    auto x = random_param({3, 7}, rng, "x");
    auto gamma = random_param({7}, rng, "gamma", 0.5);
    auto beta = random_param({7}, rng, "beta", 0.5);
    std::vector<Tensor<double>> params = {x, gamma, beta};
    auto report = grad_check([&] { return weighted_sum(layer_norm(x, gamma, beta, 1e-5)); }, params, 1e-5, 1e-5);
    CHECK(report.passed);
}

TEST_CASE("linear identity, hand arithmetic, gradients") {
    auto eye = Tensor<double>::param({2, 2}, {1, 0, 0, 1}, "w");
    auto zero = Tensor<double>::param({2}, {0, 0}, "b");
    auto x = Tensor<double>::from({1, 2}, {4, 9});
    CHECK(linear(x, eye, zero).data() == std::vector<double>{4, 9});

    auto w = Tensor<double>::param({1, 2}, {1, 1}, "w1");
    auto b = Tensor<double>::param({1}, {1}, "b1");
    CHECK(linear(Tensor<double>::from({1, 2}, {2, 3}), w, b).data() == std::vector<double>{6});

    Rng rng(13);
    auto xp = random_param({4, 5}, rng, "x");
    auto wp = random_param({3, 5}, rng, "w");
    auto bp = random_param({3}, rng, "b");
    std::vector<Tensor<double>> params = {xp, wp, bp};
    auto report = grad_check([&] { return weighted_sum(linear(xp, wp, bp)); }, params, 1e-5, 1e-5);
    CHECK(report.passed);
}

TEST_CASE("cross_entropy analytic values") {
    auto logits = Tensor<double>::from({1, 4}, {0.7, 0.7, 0.7, 0.7});
    auto loss = cross_entropy(logits, {2});
    CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    auto saturated = cross_entropy(Tensor<double>::from({1, 3}, {1000, 0, 0}), {0});
    CHECK(saturated.item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cross_entropy rejects out-of-range labels") {
    auto logits = Tensor<double>::from({2, 3}, {0, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS(cross_entropy(logits, {0, 3}), IndexError);
    CHECK_THROWS_AS(cross_entropy(logits, {-1, 0}), IndexError);
}

TEST_CASE("cross_entropy shift invariance") {
    Rng rng(17);
    auto logits = random_tensor({6, 9}, rng, 2.0);
    std::vector<std::int64_t> labels;
    for (int i = 0; i < 6; ++i) labels.push_back(static_cast<std::int64_t>(rng.next_below(9)));
    const double base = cross_entropy(logits, labels).item();
    for (const double c : {1.0, -3.5, 123.25}) {
        std::vector<double> shifted = logits.data();
        for (auto& v : shifted) v += c;
        const double moved = cross_entropy(Tensor<double>::from({6, 9}, std::move(shifted)), labels).item();
        CHECK(std::abs(moved - base) <= 1e-10);
    }
}

TEST_CASE("cross_entropy gradient vs finite differences") {
    Rng rng(19);
    auto logits = random_param({4, 5}, rng, "logits");
    std::vector<std::int64_t> labels = {0, 3, 1, 4};
    std::vector<Tensor<double>> params = {logits};
    auto report = grad_check([&] { return cross_entropy(logits, labels); }, params, 1e-5, 1e-5);
    CHECK(report.passed);
}

TEST_CASE("backward fills ones for sum and 2x for sum of squares") {
    auto x = Tensor<double>::param({2, 3}, {1, -2, 3, 0.5, 4, -1}, "x");
    sum_all(x).backward();
    for (const auto g : x.grad()) CHECK(g == 1.0);

    auto y = Tensor<double>::param({3}, {1, 2, 3}, "y");
    sum_all(mul(y, y)).backward();
    CHECK(y.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward twice without zero_grads throws") {
    auto x = Tensor<double>::param({2}, {1, 2}, "x");
    auto make_loss = [&] { return sum_all(mul(x, x)); };
    make_loss().backward();
    CHECK_THROWS_AS(make_loss().backward(), NumericError);
    x.zero_grad();
    CHECK_NOTHROW(make_loss().backward());
}

TEST_CASE("gradients sum across multiple uses of a tensor") {
    auto x = Tensor<double>::param({2}, {3, -1}, "x");
    // loss = sum(x*x) + sum(x) -> grad = 2x + 1
    auto loss = add(sum_all(mul(x, x)), sum_all(x));
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(x.grad()[1] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("grad_check on f(x)=x^2 at x=3") {
    auto x = Tensor<double>::param({1}, {3.0}, "x");
    std::vector<Tensor<double>> params = {x};
    auto report = grad_check([&] { return sum_all(mul(x, x)); }, params, 1e-5, 1e-9);
    CHECK(report.passed);
    CHECK(report.max_rel_err <= 1e-9);
}

TEST_CASE("every primitive passes finite-difference checks on random inputs") {
    Rng rng(23);
    struct Case {
        const char* name;
        std::function<Tensor<double>(std::vector<Tensor<double>>&)> loss;
        std::vector<std::vector<std::int64_t>> shapes;
    };
    auto wsum = [](const Tensor<double>& t) { return weighted_sum(t); };

    std::vector<Case> cases;
    cases.push_back({"matmul", [&](auto& p) { return wsum(matmul(p[0], p[1])); }, {{4, 3}, {3, 5}}});
    cases.push_back({"matmul_nt", [&](auto& p) { return wsum(matmul_nt(p[0], p[1])); }, {{4, 3}, {5, 3}}});
    cases.push_back({"add", [&](auto& p) { return wsum(add(p[0], p[1])); }, {{3, 4}, {3, 4}}});
    cases.push_back({"mul", [&](auto& p) { return wsum(mul(p[0], p[1])); }, {{3, 4}, {3, 4}}});
    cases.push_back({"scale", [&](auto& p) { return wsum(scale(p[0], 2.5)); }, {{3, 4}}});
    cases.push_back({"gelu", [&](auto& p) { return wsum(gelu(p[0])); }, {{3, 4}}});
    cases.push_back({"relu_shifted", [&](auto& p) { return wsum(relu(add(p[0], p[0]))); }, {{3, 4}}});
    cases.push_back({"softmax1", [&](auto& p) { return wsum(softmax(p[0], 1)); }, {{3, 5}}});
    cases.push_back({"softmax0", [&](auto& p) { return wsum(softmax(p[0], 0)); }, {{3, 5}}});
    cases.push_back({"mean_rows", [&](auto& p) { return wsum(mean_rows(p[0])); }, {{5, 4}}});
    cases.push_back({"group_sum", [&](auto& p) { return wsum(group_sum_rows(p[0], 2)); }, {{5, 3}}});
    cases.push_back({"group_max", [&](auto& p) { return wsum(group_max_rows(p[0], 2)); }, {{5, 3}}});
    cases.push_back({"pad_rows", [&](auto& p) { return wsum(pad_rows(p[0], 6)); }, {{4, 3}}});
    cases.push_back({"reshape", [&](auto& p) { return wsum(reshape(p[0], {2, 6})); }, {{4, 3}}});
    cases.push_back({"slice_cols", [&](auto& p) { return wsum(slice_cols(p[0], 1, 3)); }, {{4, 6}}});
    cases.push_back(
        {"concat_cols", [&](auto& p) { return wsum(concat_cols<double>({p[0], p[1]})); }, {{4, 2}, {4, 3}}});
    cases.push_back(
        {"concat_rows", [&](auto& p) { return wsum(concat_rows<double>({p[0], p[1]})); }, {{2, 4}, {3, 4}}});
    cases.push_back({"layer_norm", [&](auto& p) { return wsum(layer_norm(p[0], p[1], p[2], 1e-5)); },
                     {{4, 6}, {6}, {6}}});

    for (auto& c : cases) {
        CAPTURE(c.name);
        std::vector<Tensor<double>> params;
        for (std::size_t i = 0; i < c.shapes.size(); ++i) {
            params.push_back(random_param(c.shapes[i], rng, std::string(c.name) + std::to_string(i)));
        }
        auto report = grad_check([&] { return c.loss(params); }, params, 1e-5, 1e-5);
        INFO(c.name << " max rel err " << report.max_rel_err << " at " << report.worst_param);
        CHECK(report.passed);
    }
}

TEST_CASE("adamw closed-form first step and decay-only case") {
    auto p = Tensor<double>::param({1}, {1.0}, "p");
    AdamW<double> opt({p}, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    auto loss = sum_all(p);  // grad = 1
    loss.backward();
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(opt.step_count() == 1);

    // zero grad, zero decay: bitwise unchanged across an epoch of steps
    auto q = Tensor<double>::param({1}, {0.75}, "q");
    AdamW<double> opt2({q}, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 40; ++i) {
        q.zero_grad();
        scale(q, 0.0).backward();  // d(0*q)/dq = 0
        opt2.step();
        CHECK(q.data()[0] == 0.75);
    }

    // decay-only: p' = p - lr*wd*p
    auto r = Tensor<double>::param({1}, {1.0}, "r");
    AdamW<double> opt3({r}, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
    r.zero_grad();
    scale(r, 0.0).backward();
    opt3.step();
    CHECK(r.data()[0] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("adamw with zero decay reduces to a hand-rolled adam") {
    // scalar quadratic f(p) = p^2, grad 2p
    auto p = Tensor<double>::param({1}, {1.5}, "p");
    AdamW<double> opt({p}, AdamWConfig{0.05, 0.9, 0.999, 1e-8, 0.0});

    double ref_p = 1.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 10; ++t) {
        p.zero_grad();
        sum_all(mul(p, p)).backward();
        opt.step();

        const double g = 2.0 * ref_p;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        ref_p -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(std::abs(p.data()[0] - ref_p) <= 1e-12);
    }
}

TEST_CASE("adamw reports missing gradients by name") {
    auto p = Tensor<double>::param({1}, {1.0}, "lonely.weight");
    AdamW<double> opt({p}, AdamWConfig{});
    try {
        opt.step();
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("lonely.weight") != std::string::npos);
    }
}

TEST_CASE("kaiming init statistics and determinism") {
    Rng rng(31);
    auto t = kaiming_init<double>({1000, 1000}, 2, rng, "w");
    double mean = 0.0;
    for (const auto v : t.data()) mean += v;
    mean /= static_cast<double>(t.numel());
    double var = 0.0;
    for (const auto v : t.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(t.numel());
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(0.02));

    Rng r1(42), r2(42);
    auto a = kaiming_init<float>({16, 8}, 8, r1, "a");
    auto b = kaiming_init<float>({16, 8}, 8, r2, "b");
    CHECK(a.data() == b.data());

    LinearLayer<double> layer(4, 3, rng, "layer");
    for (const auto v : layer.bias.data()) CHECK(v == 0.0);
}

TEST_CASE("non-finite outputs are rejected") {
    set_finite_checks(true);
    CHECK_THROWS_AS(Tensor<double>::from({1}, {std::numeric_limits<double>::infinity()}), NumericError);
    auto big = Tensor<double>::from({1}, {1e308});
    CHECK_THROWS_AS(scale(big, 1e10), NumericError);
}

TEST_CASE("tensor invariants: shape product and grad length") {
    auto t = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor<double>::from({2, 2}, {1, 2, 3}), DimensionError);

    auto p = Tensor<double>::param({3}, {1, 2, 3}, "p");
    sum_all(p).backward();
    CHECK(p.grad().size() == p.data().size());
}
