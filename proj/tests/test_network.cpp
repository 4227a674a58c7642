#include <doctest.h>

#include "gradient_helpers.hpp"
#include "mcdfn/network.hpp"

using namespace mcdfn;
using mcdfn::testing::dot;
using mcdfn::testing::random_tensor;

namespace {

void randomize(Network& net, std::uint64_t seed, double scale = 0.5) {
    RandomSource rng(seed);
    for (Tensor* p : net.parameters()) *p = random_tensor(p->shape(), rng, scale);
}

NetworkSpec tiny_mcdfn(const std::set<Branch>& excluded = {}) {
    McdfnOptions o;
    o.conv_filters = 4;
    o.conv_kernel = 2;
    o.pool = 2;
    o.cnn_dense = 3;
    o.bilstm_units = 3;
    o.bigru_units = 2;
    o.lstm_units_1 = 3;
    o.lstm_units_2 = 2;
    o.bilstm_dropout = 0.0;
    o.bigru_dropout = 0.0;
    o.stacked_dropout = 0.0;
    return mcdfn_spec(o, excluded, {6, 3}, 4);
}

}  // namespace

TEST_CASE("benchmark parameter counts") {
    const std::pair<const char*, std::size_t> expected[] = {
        {"BiLSTM", 657438},     {"CNN", 191006}, {"RNN", 133022}, {"StackedLSTM", 3631134},
        {"VanillaLSTM", 957150}, {"FCN", 6145},   {"GRU", 290334}, {"MCDFN", 1123358},
    };
    for (const auto& [name, count] : expected) {
        CAPTURE(name);
        const Network net(model_spec(name));
        CHECK(net.param_count() == count);
        std::size_t analytic = 0;
        for (const BranchSpec& b : net.spec().branches) {
            Shape shape = net.spec().input;
            for (const LayerConfig& c : b.layers) {
                analytic += parameter_count(c, shape);
                shape = output_shape(c, shape);
            }
        }
        CHECK(analytic <= count);
    }
}

TEST_CASE("model names") {
    CHECK(canonical_model_name("mcdfn") == "MCDFN");
    CHECK(canonical_model_name("vanillalstm") == "VanillaLSTM");
    CHECK_THROWS_AS(model_spec("Transformer"), Error);
    CHECK(model_names().size() == 8);
}

TEST_CASE("ablation variants") {
    CHECK(ablation_variants().size() == 10);
    std::set<std::set<Branch>> distinct(ablation_variants().begin(), ablation_variants().end());
    CHECK(distinct.size() == 10);
    for (const auto& ex : ablation_variants()) {
        CHECK(!ex.empty());
        CHECK(ex.size() <= 2);
    }
    const NetworkSpec s = mcdfn_spec({}, {Branch::kBiLSTM, Branch::kCNN});
    REQUIRE(s.branches.size() == 2);
    CHECK(s.branches[0].name == "BiGRU");
    CHECK(s.branches[1].name == "StackedLSTM");
    // Fusion Dense resized to the remaining width 3840 + 1920.
    CHECK(Network(s).param_count() == 29184 + 19200 + 33024 + 5760 * 30 + 30);
    CHECK(Network(mcdfn_spec({}, {})).param_count() == 1123358);
    CHECK_THROWS_AS(mcdfn_spec({}, {Branch::kCNN, Branch::kBiLSTM, Branch::kBiGRU, Branch::kStackedLSTM}), Error);
    CHECK(ablation_name({Branch::kCNN, Branch::kBiLSTM}) == "w/o BiLSTM+CNN");
    CHECK(model_spec("w/o BiLSTM+CNN").branches.size() == 2);
}

TEST_CASE("fresh networks predict zeros") {
    RandomSource rng(5);
    RandomSource data(6);
    const Tensor x = random_tensor({2, 30, 10}, data);
    for (const char* name : {"FCN", "CNN", "GRU"}) {
        const Network net = build(name, rng);
        CHECK(net.forward(x) == Tensor({2, 30, 1}));
    }
}

TEST_CASE("batch independence and equivariance") {
    Network net(tiny_mcdfn());
    randomize(net, 3);
    RandomSource rng(4);
    const Tensor a = random_tensor({1, 6, 3}, rng);
    const Tensor b = random_tensor({1, 6, 3}, rng);
    std::vector<double> ab(a.values().begin(), a.values().end());
    ab.insert(ab.end(), b.values().begin(), b.values().end());
    std::vector<double> ba(b.values().begin(), b.values().end());
    ba.insert(ba.end(), a.values().begin(), a.values().end());
    const Tensor yab = net.forward(Tensor({2, 6, 3}, ab));
    const Tensor yba = net.forward(Tensor({2, 6, 3}, ba));
    const Tensor ya = net.forward(a);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(yab[i] == ya[i]);
        CHECK(yba[4 + i] == ya[i]);
        CHECK(yab[4 + i] == yba[i]);
    }
    std::vector<double> aa(a.values().begin(), a.values().end());
    aa.insert(aa.end(), a.values().begin(), a.values().end());
    const Tensor yaa = net.forward(Tensor({2, 6, 3}, aa));
    for (std::size_t i = 0; i < 4; ++i) CHECK(yaa[i] == yaa[4 + i]);
}

TEST_CASE("tiny MCDFN gradient check") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Network net(tiny_mcdfn());
        randomize(net, seed);
        RandomSource rng(seed + 100);
        const Tensor x = random_tensor({2, 6, 3}, rng);
        const Tensor w = random_tensor({2, 4, 1}, rng);
        std::unique_ptr<NetworkCache> cache;
        net.forward(x, {}, cache);
        std::vector<Tensor> grads = net.zero_gradients();
        const Tensor dx = net.backward(w, *cache, grads);
        CHECK(grad_check([&](const Tensor& p) { return dot(w, net.forward(p)); }, dx, x) < 1e-4);
        auto params = net.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor saved = p;
            const double err = grad_check(
                [&](const Tensor& probe) {
                    p = probe;
                    const double v = dot(w, net.forward(x));
                    p = saved;
                    return v;
                },
                grads[i], saved);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("clone and parameter naming") {
    RandomSource rng(1);
    const Network net = build("MCDFN", rng);
    const Network copy = net.clone();
    const auto a = net.parameters();
    const auto b = copy.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
    const auto names = net.parameter_names();
    CHECK(names.front() == "CNN/0_Conv1D/kernel");
    CHECK(names.back() == "head/0_Dense/bias");
    CHECK_THROWS_AS(net.forward(Tensor({1, 30, 9})), Error);
}

TEST_CASE("ablation variants share initialization of common branches") {
    RandomSource rng(77);
    const Network full = build("MCDFN", rng);
    const Network part = build_ablation({Branch::kCNN}, rng);
    const auto fn = full.parameter_names();
    const auto pn = part.parameter_names();
    const auto fp = full.parameters();
    const auto pp = part.parameters();
    for (std::size_t i = 0; i < pn.size(); ++i) {
        const auto it = std::find(fn.begin(), fn.end(), pn[i]);
        REQUIRE(it != fn.end());
        if (pn[i].rfind("head", 0) != 0) CHECK(*fp[static_cast<std::size_t>(it - fn.begin())] == *pp[i]);
    }
}
