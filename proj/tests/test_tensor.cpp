#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qeno/tensor.hpp"

using namespace qeno;

TEST_CASE("conv2d identity-scale kernel") {
    auto x = Tensor::full({1, 1, 3, 3}, 1.0);
    auto k = Tensor::from({1, 1, 1, 1}, {2.0});
    auto y = conv2d(x, k, 1, 0);
    CHECK(y->shape == std::vector<int>{1, 1, 3, 3});
    for (double v : y->data) CHECK(v == 2.0);
}

TEST_CASE("conv2d 3x3 all-ones kernel sums the full input at the center") {
    std::vector<double> vals(9);
    for (int i = 0; i < 9; ++i) vals[static_cast<std::size_t>(i)] = i + 1;
    auto x = Tensor::from({1, 1, 3, 3}, vals);
    auto k = Tensor::full({1, 1, 3, 3}, 1.0);
    auto y = conv2d(x, k, 1, 1);
    CHECK(y->shape == std::vector<int>{1, 1, 3, 3});
    CHECK(y->data[4] == 45.0);
}

TEST_CASE("conv2d matches the naive loop oracle") {
    Rng rng(7);
    auto x = oracle::random_tensor({2, 4, 8, 8}, rng);
    auto k = oracle::random_tensor({6, 4, 3, 3}, rng);
    auto y = conv2d(x, k, 2, 1);
    CHECK(y->shape == std::vector<int>{2, 6, 4, 4});
    int OH = 0, OW = 0;
    auto ref = oracle::conv2d(x->data, 2, 4, 8, 8, k->data, 6, 3, 3, 2, 1, OH, OW);
    REQUIRE(ref.size() == y->size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(std::abs(y->data[i] - ref[i]) < 1e-12);
}

TEST_CASE("conv2d rejects channel mismatch with a named axis") {
    auto x = Tensor::full({1, 3, 4, 4}, 0.0);
    auto k = Tensor::full({2, 4, 3, 3}, 0.0);
    CHECK_THROWS_WITH_AS(conv2d(x, k, 1, 1), doctest::Contains("channel axis"), DimensionError);
}

TEST_CASE("conv_transpose2d scatters a unit input through the kernel") {
    auto x = Tensor::from({1, 1, 1, 1}, {1.0});
    auto k = Tensor::full({1, 1, 2, 2}, 1.0);
    auto y = conv_transpose2d(x, k, 1, 0);
    CHECK(y->shape == std::vector<int>{1, 1, 2, 2});
    for (double v : y->data) CHECK(v == 1.0);
}

TEST_CASE("conv_transpose2d output extent follows the shape formula") {
    auto x = Tensor::full({1, 1, 4, 4}, 0.5);
    auto k = Tensor::full({1, 1, 3, 3}, 0.1);
    auto y = conv_transpose2d(x, k, 2, 1);
    CHECK(y->shape == std::vector<int>{1, 1, 7, 7});
    auto y2 = conv_transpose2d(x, k, 2, 1, 1);
    CHECK(y2->shape == std::vector<int>{1, 1, 8, 8});
}

TEST_CASE("conv2d / conv_transpose2d adjoint identity") {
    Rng rng(11);
    struct Case {
        int stride, pad, outpad;
    };
    for (Case c : {Case{1, 0, 0}, Case{1, 1, 0}, Case{2, 1, 1}}) {
        auto x = oracle::random_tensor({1, 2, 4, 4}, rng);
        auto k = oracle::random_tensor({2, 2, 3, 3}, rng);
        auto cx = conv2d(x, k, c.stride, c.pad);
        auto y = oracle::random_tensor(cx->shape, rng);
        auto cty = conv_transpose2d(y, k, c.stride, c.pad, c.outpad);
        REQUIRE(cty->shape == x->shape);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < cx->size(); ++i) lhs += cx->data[i] * y->data[i];
        for (std::size_t i = 0; i < x->size(); ++i) rhs += x->data[i] * cty->data[i];
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("conv3d basics and oracle match") {
    SUBCASE("zero input stays zero") {
        auto x = Tensor::full({1, 1, 3, 4, 4}, 0.0);
        auto k = Tensor::full({1, 1, 3, 3, 3}, 0.3);
        auto y = conv3d(x, k, 1);
        CHECK(y->shape == x->shape);
        for (double v : y->data) CHECK(v == 0.0);
    }
    SUBCASE("delta input spreads the all-ones kernel") {
        auto x = Tensor::full({1, 1, 3, 3, 3}, 0.0);
        x->data[13] = 1.0;  // center voxel
        auto k = Tensor::full({1, 1, 3, 3, 3}, 1.0);
        auto y = conv3d(x, k, 1);
        for (double v : y->data) CHECK(v == 1.0);
    }
    SUBCASE("random volume matches the loop oracle") {
        Rng rng(5);
        auto x = oracle::random_tensor({2, 1, 4, 5, 6}, rng);
        auto k = oracle::random_tensor({1, 1, 3, 3, 3}, rng);
        auto y = conv3d(x, k, 1);
        auto ref = oracle::conv3d(x->data, 2, 4, 5, 6, k->data, 3, 3, 3, 1);
        REQUIRE(ref.size() == y->size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(y->data[i] - ref[i]) < 1e-12);
    }
}

TEST_CASE("linear") {
    SUBCASE("identity weights pass the input through") {
        auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
        auto W = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        auto b = Tensor::full({3}, 0.0);
        auto y = linear(x, W, b);
        for (std::size_t i = 0; i < 6; ++i) CHECK(y->data[i] == x->data[i]);
    }
    SUBCASE("hand example") {
        auto x = Tensor::from({1, 2}, {1.0, 2.0});
        auto W = Tensor::from({1, 2}, {1.0, 1.0});
        auto b = Tensor::from({1}, {0.5});
        CHECK(linear(x, W, b)->data[0] == 3.5);
    }
    SUBCASE("random case matches a loop oracle") {
        Rng rng(3);
        auto x = oracle::random_tensor({4, 8}, rng);
        auto W = oracle::random_tensor({3, 8}, rng);
        auto b = oracle::random_tensor({3}, rng);
        auto y = linear(x, W, b);
        for (int bi = 0; bi < 4; ++bi)
            for (int m = 0; m < 3; ++m) {
                double acc = b->data[static_cast<std::size_t>(m)];
                for (int n = 0; n < 8; ++n)
                    acc += x->data[static_cast<std::size_t>(bi * 8 + n)] *
                           W->data[static_cast<std::size_t>(m * 8 + n)];
                CHECK(std::abs(y->data[static_cast<std::size_t>(bi * 3 + m)] - acc) < 1e-12);
            }
    }
    SUBCASE("inner dimension mismatch throws") {
        auto x = Tensor::full({1, 3}, 0.0);
        auto W = Tensor::full({2, 4}, 0.0);
        auto b = Tensor::full({2}, 0.0);
        CHECK_THROWS_AS(linear(x, W, b), DimensionError);
    }
}

TEST_CASE("elementwise basics") {
    CHECK(sigmoid(Tensor::scalar(0.0))->data[0] == 0.5);
    auto m = mean_axes(Tensor::from({2, 2}, {1, 2, 3, 4}), {0, 1});
    CHECK(m->data[0] == 2.5);
    auto c = concat({Tensor::full({2, 3}, 1.0), Tensor::full({2, 5}, 2.0)}, 1);
    CHECK(c->shape == std::vector<int>{2, 8});
    CHECK(c->data[2] == 1.0);
    CHECK(c->data[3] == 2.0);
    CHECK_THROWS_AS(add(Tensor::full({2}, 0.0), Tensor::full({3}, 0.0)), DimensionError);
    CHECK_THROWS_AS(reshape(Tensor::full({4}, 0.0), {3}), DimensionError);
}

TEST_CASE("spatial mean pool reduces the stated axes") {
    auto x = Tensor::from({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    auto y = mean_axes(x, {2, 3});
    CHECK(y->shape == std::vector<int>{1, 2});
    CHECK(y->data[0] == 2.5);
    CHECK(y->data[1] == 25.0);
}

TEST_CASE("backward on sum gives unit gradients") {
    auto x = Tensor::full({2, 3, 2}, 0.7, true);
    backward(sum_all(x));
    for (double g : x->grad) CHECK(g == 1.0);
}

TEST_CASE("sigmoid derivative at zero is 0.25") {
    auto x = Tensor::scalar(0.0, true);
    auto w = Tensor::scalar(1.0);
    backward(mul(sigmoid(x), w));
    CHECK(x->grad[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward requires a scalar loss") {
    auto x = Tensor::full({2, 2}, 1.0, true);
    CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("gradients accumulate across backward calls") {
    auto x = Tensor::full({3}, 2.0, true);
    auto loss1 = sum_all(x);
    backward(loss1);
    auto loss2 = sum_all(x);
    backward(loss2);
    for (double g : x->grad) CHECK(g == 2.0);
}

TEST_CASE("reshape round-trips bit-exactly") {
    Rng rng(9);
    auto x = oracle::random_tensor({3, 4, 5}, rng);
    auto y = reshape(reshape(x, {5, 12}), {3, 4, 5});
    CHECK(y->data == x->data);
}

TEST_CASE("forward purity: identical inputs give bit-identical outputs") {
    Rng rng(13);
    auto x = oracle::random_tensor({1, 2, 6, 6}, rng);
    auto k = oracle::random_tensor({3, 2, 3, 3}, rng);
    auto a = conv2d(x, k, 1, 1);
    auto b = conv2d(x, k, 1, 1);
    CHECK(a->data == b->data);
}

// ---------------------------------------------------------------------------
// finite-difference gradient checks, 10 seeds per op
// ---------------------------------------------------------------------------

namespace {

// Builds loss = sum(op(leaves...) * r) with a fixed random probe tensor r.
double check_op(std::uint64_t seed, const std::vector<std::vector<int>>& leaf_shapes,
                const std::function<TensorPtr(const std::vector<TensorPtr>&)>& apply) {
    Rng rng(seed);
    std::vector<TensorPtr> leaves;
    leaves.reserve(leaf_shapes.size());
    for (const auto& s : leaf_shapes) leaves.push_back(oracle::random_tensor(s, rng, -1.0, 1.0, true));
    auto probe_shape = apply(leaves)->shape;
    auto probe = oracle::random_tensor(probe_shape, rng);
    auto make_loss = [&] { return sum_all(mul(apply(leaves), probe)); };
    return oracle::max_grad_rel_err(leaves, [&] { return make_loss()->item(); }, make_loss);
}

}  // namespace

TEST_CASE("finite-difference gradient checks per op") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CAPTURE(seed);
        CHECK(check_op(seed, {{2, 3, 5, 5}, {4, 3, 3, 3}},
                       [](const auto& l) { return conv2d(l[0], l[1], 1, 1); }) < 1e-4);
        CHECK(check_op(seed, {{1, 3, 6, 6}, {4, 3, 3, 3}},
                       [](const auto& l) { return conv2d(l[0], l[1], 2, 1); }) < 1e-4);
        CHECK(check_op(seed, {{1, 3, 3, 3}, {3, 2, 3, 3}},
                       [](const auto& l) { return conv_transpose2d(l[0], l[1], 2, 1, 1); }) < 1e-4);
        CHECK(check_op(seed, {{1, 1, 3, 4, 4}, {1, 1, 3, 3, 3}},
                       [](const auto& l) { return conv3d(l[0], l[1], 1); }) < 1e-4);
        CHECK(check_op(seed, {{3, 4}, {5, 4}, {5}},
                       [](const auto& l) { return linear(l[0], l[1], l[2]); }) < 1e-4);
        CHECK(check_op(seed, {{2, 6}}, [](const auto& l) { return sigmoid(l[0]); }) < 1e-4);
        CHECK(check_op(seed, {{2, 6}}, [](const auto& l) { return tanh_op(l[0]); }) < 1e-4);
        CHECK(check_op(seed, {{2, 6}}, [](const auto& l) { return leaky_relu(l[0], 0.2); }) < 1e-4);
        CHECK(check_op(seed, {{3, 4}, {3, 4}}, [](const auto& l) { return mul(l[0], l[1]); }) < 1e-4);
        CHECK(check_op(seed, {{3, 4}, {3, 4}}, [](const auto& l) { return add(l[0], l[1]); }) < 1e-4);
        CHECK(check_op(seed, {{2, 3}, {2, 5}},
                       [](const auto& l) { return concat({l[0], l[1]}, 1); }) < 1e-4);
        CHECK(check_op(seed, {{2, 4, 3, 3}},
                       [](const auto& l) { return mean_axes(l[0], {2, 3}); }) < 1e-4);
        CHECK(check_op(seed, {{2, 8}},
                       [](const auto& l) { return reshape(l[0], {4, 4}); }) < 1e-4);
        CHECK(check_op(seed, {{4, 6}, {4}},
                       [](const auto& l) { return rowwise_scale(l[0], l[1]); }) < 1e-4);
        CHECK(check_op(seed, {{2, 3, 4, 4}, {3}},
                       [](const auto& l) { return bias_channel(l[0], l[1]); }) < 1e-4);
        CHECK(check_op(seed, {{2, 9}},
                       [](const auto& l) { return slice(l[0], 1, 3, 4); }) < 1e-4);
        CHECK(check_op(seed, {{3, 5}}, [](const auto& l) { return scale(l[0], -1.7); }) < 1e-4);
    }
}

TEST_CASE("relu gradient check away from the kink") {
    // Shift inputs off zero so the finite difference never straddles the kink.
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        auto x = oracle::random_tensor({4, 4}, rng, 0.1, 1.0, true);
        for (std::size_t i = 0; i < x->size(); ++i)
            if (i % 2 == 0) x->data[i] = -x->data[i];
        auto probe = oracle::random_tensor({4, 4}, rng);
        auto make_loss = [&] { return sum_all(mul(relu(x), probe)); };
        CHECK(oracle::max_grad_rel_err({x}, [&] { return make_loss()->item(); }, make_loss) < 1e-4);
    }
}

TEST_CASE("no-grad mode skips graph recording") {
    auto x = Tensor::full({2, 2}, 1.0, true);
    TensorPtr y;
    {
        NoGradGuard guard;
        y = add(x, x);
    }
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
}
