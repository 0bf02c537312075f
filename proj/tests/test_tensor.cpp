#include <doctest.h>

#include <cmath>
#include <numeric>

#include "desate/error.hpp"
#include "desate/kernels.hpp"
#include "desate/optim.hpp"
#include "desate/tensor.hpp"
#include "support.hpp"

using namespace desate;
using namespace testing_support;

TEST_SUITE("matmul") {
    TEST_CASE("identity times matrix") {
        Tensor eye = Tensor::identity(2);
        Tensor m = Tensor::from(2, 2, {1, 2, 3, 4});
        CHECK(to_vec(matmul(eye, m).values()) == std::vector<double>{1, 2, 3, 4});
    }

    TEST_CASE("row times column") {
        Tensor r = matmul(Tensor::from(1, 2, {1, 2}), Tensor::from(2, 1, {3, 4}));
        CHECK(r.shape() == Shape{1, 1});
        CHECK(r.item() == 11.0);
    }

    TEST_CASE("random 3x4 by 4x2 equals brute-force triple loop") {
        auto a = random_vector(12, 5), b = random_vector(8, 6);
        Tensor c = matmul(Tensor::from(3, 4, a), Tensor::from(4, 2, b));
        CHECK(max_abs_diff(to_vec(c.values()), naive_matmul(a, b, 3, 4, 2)) < 1e-14);
    }

    TEST_CASE("shape mismatch names both shapes") {
        try {
            matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
            FAIL("expected DimensionError");
        } catch (const DimensionError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("[2 x 3]") != std::string::npos);
            CHECK(msg.find("[2 x 3] * [2 x 3]") != std::string::npos);
        }
    }

    TEST_CASE("associativity on random conformable triples") {
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t m = 1 + trial % 5, k = 2 + trial % 4, l = 1 + trial % 6, n = 3 + trial % 3;
            Tensor a = random_tensor(m, k, 100 + trial);
            Tensor b = random_tensor(k, l, 200 + trial);
            Tensor c = random_tensor(l, n, 300 + trial);
            auto left = to_vec(matmul(matmul(a, b), c).values());
            auto right = to_vec(matmul(a, matmul(b, c)).values());
            for (std::size_t i = 0; i < left.size(); ++i)
                CHECK(rel_err(left[i], right[i], 1e-12) <= 1e-9);
        }
    }
}

TEST_SUITE("softmax_rows") {
    TEST_CASE("uniform row") {
        auto v = to_vec(softmax_rows(Tensor::from(1, 3, {0, 0, 0})).values());
        for (double x : v) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }

    TEST_CASE("large logits do not overflow") {
        auto v = to_vec(softmax_rows(Tensor::from(1, 2, {1000, 0})).values());
        CHECK(std::isfinite(v[0]));
        CHECK(v[0] == doctest::Approx(1.0));
        CHECK(v[1] == doctest::Approx(0.0));
    }

    TEST_CASE("matches direct exp formula") {
        auto v = to_vec(softmax_rows(Tensor::from(1, 3, {1, 2, 3})).values());
        const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
        CHECK(std::abs(v[0] - std::exp(1.0) / z) < 1e-12);
        CHECK(std::abs(v[1] - std::exp(2.0) / z) < 1e-12);
        CHECK(std::abs(v[2] - std::exp(3.0) / z) < 1e-12);
    }

    TEST_CASE("rows sum to one and are shift invariant") {
        for (int trial = 0; trial < 100; ++trial) {
            Tensor x = random_tensor(4, 7, 900 + trial, false, -20, 20);
            auto y = to_vec(softmax_rows(x).values());
            std::vector<double> shifted = to_vec(x.values());
            for (std::size_t j = 0; j < 7; ++j) shifted[7 + j] += 123.456;  // shift row 1
            auto ys = to_vec(softmax_rows(Tensor::from(4, 7, shifted)).values());
            for (std::size_t r = 0; r < 4; ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < 7; ++j) {
                    CHECK(y[r * 7 + j] >= 0.0);
                    s += y[r * 7 + j];
                }
                CHECK(std::abs(s - 1.0) <= 1e-12);
            }
            CHECK(max_abs_diff(y, ys) < 1e-12);
        }
    }
}

TEST_SUITE("backward") {
    TEST_CASE("sum gives all-ones gradient") {
        Tensor w = Tensor::from(2, 2, {1, -2, 3, 0.5}, true);
        Tape tape;
        {
            Tape::Scope s(tape);
            tape.backward(sum(w));
        }
        CHECK(to_vec(w.grad()) == std::vector<double>{1, 1, 1, 1});
        CHECK(tape.size() == 0);
    }

    TEST_CASE("sum of squares gives 2W") {
        Tensor w = Tensor::from(2, 2, {1, -2, 3, 0.5}, true);
        Tape tape;
        Tape::Scope s(tape);
        tape.backward(sum(mul(w, w)));
        CHECK(to_vec(w.grad()) == std::vector<double>{2, -4, 6, 1});
    }

    TEST_CASE("non-scalar loss is rejected") {
        Tensor w = Tensor::from(2, 2, {1, 2, 3, 4}, true);
        Tape tape;
        Tape::Scope s(tape);
        CHECK_THROWS_AS(tape.backward(scale(w, 2.0)), ContractError);
    }

    TEST_CASE("loss not on tape is rejected") {
        Tape tape;
        CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), ContractError);
    }

    TEST_CASE("ops outside a scope are not recorded") {
        Tensor w = Tensor::from(1, 2, {1, 2}, true);
        Tape tape;
        Tensor y = sum(w);
        CHECK(tape.size() == 0);
        CHECK(y.item() == 3.0);
    }

    TEST_CASE("random two-layer network matches central finite differences") {
        for (int trial = 0; trial < 10; ++trial) {
            Tensor x = random_tensor(5, 3, 10 + trial);
            Tensor w1 = random_tensor(3, 4, 20 + trial, true);
            Tensor b1 = random_tensor(1, 4, 30 + trial, true);
            Tensor w2 = random_tensor(4, 2, 40 + trial, true);
            Tensor b2 = random_tensor(1, 2, 50 + trial, true);
            Tensor target = random_tensor(5, 2, 60 + trial);
            auto loss = [&] {
                Tensor h = relu(add_row(matmul(x, w1), b1));
                Tensor y = add_row(matmul(h, w2), b2);
                return sum(square(sub(y, target)));
            };
            auto r = check_gradients({w1, b1, w2, b2}, loss);
            CHECK(r.worst_rel_err <= 1e-4);
        }
    }

    TEST_CASE("every differentiable op passes a finite-difference check") {
        Tensor a = random_tensor(4, 6, 1, true);
        Tensor b = random_tensor(4, 6, 2, true);
        Tensor row = random_tensor(1, 6, 3, true);
        Tensor gain = random_tensor(1, 6, 4, true, 0.5, 1.5);
        Tensor c = random_tensor(6, 3, 5, true);
        Tensor q = random_tensor(8, 6, 6, true);
        Tensor k = random_tensor(8, 6, 7, true);
        Tensor v = random_tensor(8, 6, 8, true);
        auto loss = [&] {
            Tensor t1 = softmax_rows(add_row(mul(a, b), row));
            Tensor t2 = layer_norm_rows(sub(a, scale(b, 0.3)), gain, row);
            Tensor t3 = concat_cols({slice_cols(t1, 0, 2), slice_cols(t2, 2, 6)});
            Tensor t4 = matmul(t3, c);
            Tensor t5 = concat_rows({slice_rows(t4, 1, 3), transpose(reshape(t4, 3, 4))});
            Tensor t6 = select_rows(t5, {0, 3, 3, 4});
            Tensor att = block_attention(q, k, v, 4, 2);
            Tensor att2 = attention(slice_rows(q, 0, 3), slice_rows(k, 0, 3), slice_rows(v, 0, 3));
            return add(add(add(sum_squares(t6), mean(relu(t5))), sum(mul(att, att))),
                       add(sum(square(att2)), sum(mul(t1, t2))));
        };
        auto r = check_gradients({a, b, row, gain, c, q, k, v}, loss);
        MESSAGE("components checked: " << r.components << ", worst rel err " << r.worst_rel_err);
        CHECK(r.worst_rel_err <= 1e-4);
    }

    TEST_CASE("gradients accumulate across backward calls until zeroed") {
        Tensor w = Tensor::from(1, 2, {1, 2}, true);
        for (int i = 0; i < 2; ++i) {
            Tape tape;
            Tape::Scope s(tape);
            tape.backward(sum(w));
        }
        CHECK(to_vec(w.grad()) == std::vector<double>{2, 2});
        w.zero_grad();
        CHECK(to_vec(w.grad()) == std::vector<double>{0, 0});
    }
}

TEST_SUITE("attention") {
    TEST_CASE("fused block attention equals per-block, per-head composition") {
        const std::size_t L = 5, d = 8, heads = 2, blocks = 3;
        Tensor q = random_tensor(blocks * L, d, 11), k = random_tensor(blocks * L, d, 12),
               v = random_tensor(blocks * L, d, 13);
        auto fused = to_vec(block_attention(q, k, v, L, heads).values());
        for (std::size_t b = 0; b < blocks; ++b) {
            for (std::size_t h = 0; h < heads; ++h) {
                auto cut = [&](const Tensor& t) {
                    return slice_cols(slice_rows(t, b * L, (b + 1) * L), h * 4, (h + 1) * 4);
                };
                auto ref = to_vec(attention(cut(q), cut(k), cut(v)).values());
                for (std::size_t i = 0; i < L; ++i)
                    for (std::size_t j = 0; j < 4; ++j)
                        CHECK(std::abs(fused[(b * L + i) * d + h * 4 + j] - ref[i * 4 + j]) < 1e-12);
            }
        }
    }

    TEST_CASE("rejects indivisible heads or blocks") {
        Tensor t = Tensor::zeros(6, 6);
        CHECK_THROWS_AS(block_attention(t, t, t, 4, 2), DimensionError);
        CHECK_THROWS_AS(block_attention(t, t, t, 3, 4), DimensionError);
    }
}

TEST_SUITE("adam") {
    TEST_CASE("zero gradient leaves parameters unchanged") {
        Tensor w = Tensor::from(1, 3, {0.5, -1, 2}, true);
        w.mutable_grad();  // allocate zero gradient
        Adam opt({w}, {.lr = 0.1});
        opt.step();
        CHECK(to_vec(w.values()) == std::vector<double>{0.5, -1, 2});
    }

    TEST_CASE("first step moves by -sign(g) * lr") {
        Tensor w = Tensor::from(1, 3, {0, 0, 0}, true);
        auto g = w.mutable_grad();
        g[0] = 3.0;
        g[1] = -0.01;
        g[2] = 1e-3;
        Adam opt({w}, {.lr = 0.05});
        opt.step();
        // bias-corrected first step: m_hat = g, v_hat = g^2 -> lr * g / (|g| + eps)
        CHECK(w.values()[0] == doctest::Approx(-0.05).epsilon(1e-6));
        CHECK(w.values()[1] == doctest::Approx(0.05).epsilon(1e-6));
        CHECK(w.values()[2] == doctest::Approx(-0.05).epsilon(1e-4));
    }

    TEST_CASE("three steps on w^2 from 1 decrease the objective monotonically") {
        // Scalar rollout oracle computed independently.
        double w_ref = 1.0, m = 0.0, v = 0.0;
        std::vector<double> ref;
        for (int t = 1; t <= 3; ++t) {
            const double g = 2.0 * w_ref;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            w_ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
            ref.push_back(w_ref);
        }
        Tensor w = Tensor::scalar(1.0, true);
        Adam opt({w}, {.lr = 0.1});
        double prev = 1.0;
        for (int t = 0; t < 3; ++t) {
            opt.zero_grad();
            Tape tape;
            Tape::Scope s(tape);
            tape.backward(square(w));
            opt.step();
            const double f = w.item() * w.item();
            CHECK(f < prev);
            prev = f;
            CHECK(w.item() == doctest::Approx(ref[t]).epsilon(1e-14));
        }
    }

    TEST_CASE("non-positive learning rate is a config error") {
        Tensor w = Tensor::scalar(1.0, true);
        CHECK_THROWS_AS(Adam({w}, {.lr = 0.0}), ConfigError);
        CHECK_THROWS_AS(Adam({w}, {.lr = -1e-3}), ConfigError);
    }
}

TEST_CASE("identical seeds give bit-identical parameters") {
    Rng r1(42), r2(42);
    Tensor a = Tensor::parameter(4, 5, 5, r1);
    Tensor b = Tensor::parameter(4, 5, 5, r2);
    CHECK(to_vec(a.values()) == to_vec(b.values()));
    for (double x : a.values()) CHECK(std::abs(x) <= 1.0 / std::sqrt(5.0));
}

TEST_CASE("dropout with p=0 is the identity and scales kept units otherwise") {
    Rng rng(1);
    Tensor x = random_tensor(10, 10, 3);
    CHECK(dropout(x, 0.0, rng).same_storage(x));
    auto y = to_vec(dropout(x, 0.5, rng).values());
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK((y[i] == 0.0 || std::abs(y[i] - 2.0 * x.values()[i]) < 1e-15));
    CHECK_THROWS_AS(dropout(x, 1.0, rng), ConfigError);
}
