#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "weno/gradcheck.hpp"
#include "weno/params.hpp"
#include "weno/tape.hpp"
#include "weno/tensor.hpp"

using namespace weno;

namespace {

TensorD random_tensor(std::vector<long> shape, std::mt19937_64& rng, double lo = -1.5,
                      double hi = 1.5) {
    TensorD t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("sigmoid of zero is exactly one half with slope one quarter") {
    ParameterStore<double> store;
    store.add("x", TensorD({1}, {0.0}));
    Tape<double> tape;
    Var y = tape.sigmoid(tape.param(store, "x"));
    CHECK(tape.value(y).data[0] == 0.5);
    Var loss = tape.sum(y);
    tape.backward(loss);
    CHECK(store.grad("x").data[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("tanh of zero is zero with unit slope") {
    ParameterStore<double> store;
    store.add("x", TensorD({1}, {0.0}));
    Tape<double> tape;
    Var y = tape.tanh(tape.param(store, "x"));
    CHECK(tape.value(y).data[0] == 0.0);
    tape.backward(tape.sum(y));
    CHECK(store.grad("x").data[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax over equal inputs is uniform") {
    Tape<double> tape;
    Var y = tape.softmax(tape.input(TensorD({4}, {0.7, 0.7, 0.7, 0.7})));
    for (double v : tape.value(y).data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("matmul reproduces a hand-computed product") {
    // [[1,2],[3,4]] * [1,1] = [3, 7]
    Tape<double> tape;
    Var a = tape.input(TensorD({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    Var b = tape.input(TensorD({2}, {1.0, 1.0}));
    Var c = tape.matmul(a, b);
    CHECK(tape.value(c).shape == std::vector<long>{2});
    CHECK(tape.value(c).data[0] == 3.0);
    CHECK(tape.value(c).data[1] == 7.0);
}

TEST_CASE("sum backward distributes a unit gradient to every element") {
    ParameterStore<double> store;
    store.add("x", TensorD({2, 3}, {1, 2, 3, 4, 5, 6}));
    Tape<double> tape;
    Var s = tape.sum(tape.param(store, "x"));
    CHECK(tape.value(s).item() == 21.0);
    tape.backward(s);
    for (double g : store.grad("x").data) CHECK(g == 1.0);
}

TEST_CASE("mean backward distributes one over n") {
    ParameterStore<double> store;
    store.add("x", TensorD({4}, {1, 2, 3, 4}));
    Tape<double> tape;
    Var m = tape.mean(tape.param(store, "x"));
    CHECK(tape.value(m).item() == 2.5);
    tape.backward(m);
    for (double g : store.grad("x").data) CHECK(g == 0.25);
}

TEST_CASE("max over rows picks first maxima and routes gradient there") {
    ParameterStore<double> store;
    store.add("x", TensorD({2, 3}, {1, 3, 2, 6, 4, 6}));
    Tape<double> tape;
    Var m = tape.max_rows(tape.param(store, "x"));
    CHECK(tape.value(m).data == std::vector<double>{3.0, 6.0});
    tape.backward(tape.sum(m));
    CHECK(store.grad("x").data == std::vector<double>{0, 1, 0, 1, 0, 0});
}

TEST_CASE("mean binary cross-entropy at one half against target one is ln 2") {
    ParameterStore<double> store;
    store.add("p", TensorD({1}, {0.5}));
    Tape<double> tape;
    Var loss = tape.bce(tape.param(store, "p"), TensorD({1}, {1.0}));
    CHECK(tape.value(loss).item() == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    tape.backward(loss);
    // (p - t) / (p (1 - p)) = (0.5 - 1) / 0.25 = -2
    CHECK(store.grad("p").data[0] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("row broadcast add applies the bias to every row") {
    Tape<double> tape;
    Var a = tape.input(TensorD({2, 3}, {0, 0, 0, 1, 1, 1}));
    Var b = tape.input(TensorD({3}, {10, 20, 30}));
    Var y = tape.add(a, b);
    CHECK(tape.value(y).data == std::vector<double>{10, 20, 30, 11, 21, 31});
}

TEST_CASE("parameter gradients accumulate across several backward roots") {
    ParameterStore<double> store;
    store.add("x", TensorD({1}, {3.0}));
    Tape<double> tape;
    Var x = tape.param(store, "x");
    Var l1 = tape.sum(tape.mul(x, x));  // d/dx x^2 = 6
    Var l2 = tape.sum(x);               // d/dx x   = 1
    tape.backward(l1);
    tape.backward(l2);
    CHECK(store.grad("x").data[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("gradient descent step moves a squared parameter as expected") {
    // x = 1, loss = x^2, grad = 2; step: 1 - 0.001 * 2 = 0.998
    ParameterStore<double> store;
    store.add("x", TensorD({1}, {1.0}));
    Tape<double> tape;
    Var x = tape.param(store, "x");
    tape.backward(tape.sum(tape.mul(x, x)));
    store.sgd_step(0.001);
    CHECK(store.value("x").data[0] == doctest::Approx(0.998).epsilon(1e-12));
    // grads are cleared after the step
    CHECK(store.grad("x").data[0] == 0.0);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
    std::mt19937_64 rng(99);
    ParameterStore<double> store;
    store.add("w", random_tensor({3, 3}, rng));
    const std::vector<double> before = store.value("w").data;
    Tape<double> tape;
    Var w = tape.param(store, "w");
    tape.backward(tape.sum(tape.mul(w, w)));
    store.sgd_step(0.0);
    CHECK(store.value("w").data == before);
}

TEST_CASE("uniform init stays within the fan-in bound") {
    std::mt19937_64 rng(7);
    ParameterStore<double> store;
    store.add_uniform("w", {16, 4}, 16, rng);
    const double bound = 1.0 / std::sqrt(16.0);
    for (double v : store.value("w").data) {
        CHECK(v >= -bound);
        CHECK(v <= bound);
    }
    // not all identical
    const auto& d = store.value("w").data;
    bool varied = false;
    for (double v : d) varied = varied || (v != d[0]);
    CHECK(varied);
}

// --- finite differences over random graphs --------------------------------

TEST_CASE("every primitive passes a central-difference check on random shapes") {
    std::mt19937_64 rng(2024);
    int cases = 0;
    for (int rep = 0; rep < 20; ++rep) {
        std::uniform_int_distribution<long> dim(1, 6);
        const long n = dim(rng), k = dim(rng), m = dim(rng);

        // matmul -> add bias -> tanh -> sigmoid -> mean
        {
            ParameterStore<double> store;
            store.add("a", random_tensor({n, k}, rng));
            store.add("b", random_tensor({k, m}, rng));
            store.add("bias", random_tensor({m}, rng));
            auto build = [&](Tape<double>& t) {
                Var c = t.matmul(t.param(store, "a"), t.param(store, "b"));
                Var y = t.tanh(t.add(c, t.param(store, "bias")));
                return t.mean(t.sigmoid(y));
            };
            auto rep1 = finite_difference_check(store, build);
            CHECK(rep1.deterministic);
            CHECK(rep1.max_rel_err < 1e-4);
            ++cases;
        }

        // softmax -> mul -> sum  and  relu/log/affine paths
        {
            ParameterStore<double> store;
            store.add("x", random_tensor({n, k}, rng));
            store.add("w", random_tensor({n, k}, rng));
            auto build = [&](Tape<double>& t) {
                Var s = t.softmax(t.param(store, "x"));
                Var y = t.mul(s, t.param(store, "w"));
                // log of a strictly positive quantity: sigmoid keeps it in (0,1)
                Var z = t.log(t.sigmoid(y));
                Var r = t.relu(t.affine(z, 0.5, 1.0));
                return t.sum(r);
            };
            auto rep2 = finite_difference_check(store, build);
            CHECK(rep2.deterministic);
            CHECK(rep2.max_rel_err < 1e-4);
            ++cases;
        }

        // max_rows / transpose / reshape / bce
        {
            ParameterStore<double> store;
            store.add("x", random_tensor({n, k}, rng));
            TensorD targets({n});
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            for (auto& v : targets.data) v = u01(rng);
            auto build = [&](Tape<double>& t) {
                Var xt = t.transpose(t.param(store, "x"));       // [k, n]
                Var back = t.transpose(xt);                      // [n, k]
                Var flat = t.reshape(back, {n, k});
                Var mx = t.max_rows(flat);                       // [n]
                Var p = t.sigmoid(mx);
                return t.bce(p, targets);
            };
            auto rep3 = finite_difference_check(store, build);
            CHECK(rep3.deterministic);
            CHECK(rep3.max_rel_err < 1e-4);
            ++cases;
        }

        // scalar broadcast add
        {
            ParameterStore<double> store;
            store.add("x", random_tensor({n, m}, rng));
            store.add("c", random_tensor({1}, rng));
            auto build = [&](Tape<double>& t) {
                return t.mean(t.tanh(t.add(t.param(store, "x"), t.param(store, "c"))));
            };
            auto rep4 = finite_difference_check(store, build);
            CHECK(rep4.deterministic);
            CHECK(rep4.max_rel_err < 1e-4);
            ++cases;
        }

        // rank-1 matmul (matrix-vector) with row-vector bias on the left input
        {
            ParameterStore<double> store;
            store.add("a", random_tensor({n, k}, rng));
            store.add("v", random_tensor({k}, rng));
            auto build = [&](Tape<double>& t) {
                Var y = t.matmul(t.param(store, "a"), t.param(store, "v"));
                return t.mean(t.mul(y, y));
            };
            auto rep5 = finite_difference_check(store, build);
            CHECK(rep5.deterministic);
            CHECK(rep5.max_rel_err < 1e-4);
            ++cases;
        }
    }
    CHECK(cases == 100);
}

// --- error contracts -------------------------------------------------------

TEST_CASE("shape mismatches and misuse fail loudly") {
    Tape<double> tape;
    Var a = tape.input(TensorD({2, 3}));
    Var b = tape.input(TensorD({2, 3}));
    CHECK_THROWS_AS(tape.matmul(a, b), std::invalid_argument);  // inner dims differ

    Var v = tape.input(TensorD({4}));
    CHECK_THROWS_AS(tape.matmul(v, a), std::invalid_argument);  // rank-1 left operand
    CHECK_THROWS_AS(tape.add(a, tape.input(TensorD({2}))), std::invalid_argument);
    CHECK_THROWS_AS(tape.mul(a, tape.input(TensorD({3, 2}))), std::invalid_argument);
    CHECK_THROWS_AS(tape.transpose(v), std::invalid_argument);
    CHECK_THROWS_AS(tape.max_rows(v), std::invalid_argument);
    CHECK_THROWS_AS(tape.backward(a), std::invalid_argument);  // non-scalar root

    // cross-tape use
    Tape<double> other;
    Var x = other.input(TensorD({2, 3}));
    CHECK_THROWS_AS(tape.add(a, x), std::logic_error);

    // invalid bce targets
    Var p = tape.input(TensorD({2}, {0.5, 0.5}));
    CHECK_THROWS_AS(tape.bce(p, TensorD({2}, {1.5, 0.0})), std::invalid_argument);

    // reshape that changes the element count
    CHECK_THROWS_AS(tape.reshape(a, {5}), std::invalid_argument);
}

TEST_CASE("non-finite results carry the primitive name") {
    Tape<double> tape;
    Var x = tape.input(TensorD({1}, {-1.0}));
    CHECK_THROWS_WITH_AS(tape.log(x), doctest::Contains("log"), std::runtime_error);
}

TEST_CASE("parameter store rejects duplicates, unknown names, and bad gradients") {
    ParameterStore<double> store;
    store.add("w", TensorD({2}));
    CHECK_THROWS_AS(store.add("w", TensorD({2})), std::invalid_argument);
    CHECK_THROWS_AS(store.index_of("nope"), std::out_of_range);

    store.grad("w").data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(store.sgd_step(0.1), doctest::Contains("w"), std::runtime_error);
}

TEST_CASE("a non-recording tape evaluates but refuses backward") {
    ParameterStore<double> store;
    store.add("x", TensorD({1}, {2.0}));
    Tape<double> tape(false);
    Var x = tape.param(store, "x");
    Var loss = tape.sum(tape.mul(x, x));
    CHECK(tape.value(loss).item() == 4.0);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("backward on a parameter-free graph is a no-op") {
    Tape<double> tape;
    Var loss = tape.sum(tape.input(TensorD({3}, {1, 2, 3})));
    tape.backward(loss);  // nothing requires gradients; must not throw
    CHECK(tape.value(loss).item() == 6.0);
}
