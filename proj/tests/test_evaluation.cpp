#include <cmath>
#include <vector>

#include <doctest.h>

#include "gradient_helpers.hpp"
#include "mcdfn/errors.hpp"
#include "mcdfn/evaluation.hpp"

using namespace mcdfn;
using mcdfn::testing::random_tensor;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::kIo;
}

NetworkSpec small_dense_spec() {
    NetworkSpec s;
    s.name = "small";
    s.branches = {{"mlp", {LayerConfig::dense(4, Activation::kTanh)}}};
    s.head = {LayerConfig::dense(30)};
    return s;
}

SeriesTable synthetic_days(const char* last) {
    SyntheticOptions opt;
    opt.last_day = last;
    return generate_synthetic(opt).table;
}

}  // namespace

TEST_CASE("point metrics") {
    const std::vector<double> y{2, 4}, yhat{3, 3};
    const Metrics m = metrics(y, yhat);
    CHECK(m.mae == 1.0);
    CHECK(m.mse == 1.0);
    CHECK(m.rmse == 1.0);
    CHECK(m.mape == doctest::Approx(37.5).epsilon(1e-12));
    CHECK(m.count == 2);

    const Metrics z = metrics(std::vector<double>{0, 5}, std::vector<double>{1, 4});
    CHECK(z.mape_skipped == 1);
    CHECK(z.mape == doctest::Approx(20.0));

    CHECK(kind_of([] { metrics(std::vector<double>{1}, std::vector<double>{1, 2}); }) == ErrorKind::kMetric);
    CHECK(kind_of([] { metrics(std::vector<double>{}, std::vector<double>{}); }) == ErrorKind::kMetric);
}

TEST_CASE("metric scale properties") {
    RandomSource rng(11);
    const Tensor y = random_tensor({50}, rng, 5.0);
    const Tensor yhat = random_tensor({50}, rng, 5.0);
    const Metrics base = metrics(y.values(), yhat.values());
    CHECK(base.rmse * base.rmse == doctest::Approx(base.mse).epsilon(1e-12));
    CHECK(base.mae <= base.rmse + 1e-12);

    Tensor ys = y, yhs = yhat;
    for (double& v : ys.values()) v *= 3.0;
    for (double& v : yhs.values()) v *= 3.0;
    const Metrics scaled = metrics(ys.values(), yhs.values());
    CHECK(scaled.mse == doctest::Approx(9.0 * base.mse).epsilon(1e-12));
    CHECK(scaled.mae == doctest::Approx(3.0 * base.mae).epsilon(1e-12));
    CHECK(scaled.mape == doctest::Approx(base.mape).epsilon(1e-12));
    CHECK(theils_u(ys.values(), yhs.values()) == doctest::Approx(theils_u(y.values(), yhat.values())).epsilon(1e-12));
}

TEST_CASE("theil's u anchors") {
    const std::vector<double> y{3, 5, 4, 8, 6, 7};
    std::vector<double> naive{0};
    for (std::size_t t = 1; t < y.size(); ++t) naive.push_back(y[t - 1]);
    CHECK(theils_u(y, naive) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(theils_u(y, y) == 0.0);
    CHECK(kind_of([] { theils_u(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}); }) ==
          ErrorKind::kDegenerate);

    Tensor yw({2, 3, 1}), nw({2, 3, 1});
    const double rows[2][3] = {{1, 4, 2}, {5, 5, 9}};
    for (std::size_t w = 0; w < 2; ++w) {
        for (std::size_t h = 0; h < 3; ++h) {
            yw.at(w, h, 0) = rows[w][h];
            nw.at(w, h, 0) = h ? rows[w][h - 1] : 0.0;
        }
    }
    CHECK(theils_u_windows(yw, nw) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(theils_u_windows(yw, yw) == 0.0);

    CHECK(theils_u1(y, y) == 0.0);
    CHECK(theils_u1(std::vector<double>{1, 1}, std::vector<double>{-1, -1}) == 1.0);
    CHECK(theils_u1(std::vector<double>{3, 4}, std::vector<double>{3, 0}) ==
          doctest::Approx(std::sqrt(8.0) / (std::sqrt(12.5) + std::sqrt(4.5))).epsilon(1e-14));
}

TEST_CASE("student t distribution") {
    struct Ref {
        double df, t, cdf;
    };
    const Ref refs[] = {
        {1, 0, 0.5},
        {1, 1, 0.7500000000000002},
        {1, 2.262, 0.8675023235382233},
        {1, -1.5, 0.1871670418109988},
        {9, 0, 0.5},
        {9, 1, 0.8282818019310432},
        {9, 2.262, 0.9749935772487728},
        {9, -1.5, 0.08392532802853743},
        {29, 0, 0.5},
        {29, 1, 0.8372090059919032},
        {29, 2.262, 0.9843164915904679},
        {29, -1.5, 0.07221184802019287},
    };
    for (const auto& r : refs) {
        CAPTURE(r.df);
        CAPTURE(r.t);
        CHECK(student_t_cdf(r.t, r.df) == doctest::Approx(r.cdf).epsilon(1e-12));
        CHECK(student_t_cdf(r.t, r.df) + student_t_cdf(-r.t, r.df) == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(std::abs(student_t_two_sided_p(2.262, 9) - 0.05) < 5e-4);
    CHECK(student_t_two_sided_p(-2.262, 9) == student_t_two_sided_p(2.262, 9));
    CHECK(student_t_cdf(1.96, 1e6) == doctest::Approx(0.9750019662073651).epsilon(1e-9));
    CHECK(student_t_two_sided_p(0.0, 5) == 1.0);
    CHECK(kind_of([] { student_t_cdf(1.0, 0.0); }) == ErrorKind::kMetric);
}

TEST_CASE("paired t-test") {
    const std::vector<double> a{3.1, 2.7, 4.4, 5.0, 1.9, 3.3};
    const std::vector<double> b{2.9, 2.2, 4.0, 4.1, 2.0, 2.5};
    const TTestResult r = paired_ttest(a, b);
    CHECK(r.t == doctest::Approx(2.9565194391792193).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(0.031645917766498985).epsilon(1e-10));
    CHECK(r.df == 5.0);
    CHECK(r.n == 6);

    const TTestResult flip = paired_ttest(b, a);
    CHECK(flip.t == doctest::Approx(-r.t).epsilon(1e-14));
    CHECK(flip.p == doctest::Approx(r.p).epsilon(1e-14));

    const std::vector<double> zero(4, 0.0), alt{1, -1, 1, -1};
    const TTestResult balanced = paired_ttest(alt, zero);
    CHECK(balanced.t == 0.0);
    CHECK(balanced.p == 1.0);

    const std::vector<double> shifted{2, 3, 4, 5}, base{1, 2, 3, 4};
    CHECK(kind_of([&] { paired_ttest(shifted, base); }) == ErrorKind::kDegenerate);
    CHECK(kind_of([&] { paired_ttest(std::vector<double>{1}, std::vector<double>{2}); }) == ErrorKind::kMetric);
}

TEST_CASE("prediction t-test detects a bias") {
    RandomSource rng(5);
    const Tensor truth = random_tensor({20, 30, 1}, rng, 4.0);
    const Tensor noise = random_tensor({20, 30, 1}, rng, 0.5);
    Tensor biased = truth, unbiased = truth;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        biased[i] += 2.0 + noise[i];
        unbiased[i] += noise[i];
    }
    const PredictionTTest b = prediction_ttest(truth, biased);
    CHECK(b.windows == 20);
    CHECK(b.mean_t > 10.0);
    CHECK(b.mean_p < 1e-6);
    const PredictionTTest u = prediction_ttest(truth, unbiased);
    CHECK(u.mean_p > 0.05);

    Tensor mixed = biased;
    for (std::size_t h = 0; h < 30; ++h) mixed.at(0, h, 0) = truth.at(0, h, 0) + 1.0;
    const PredictionTTest m = prediction_ttest(truth, mixed);
    CHECK(m.excluded == 1);
    CHECK(m.windows == 19);
    CHECK(kind_of([&] { prediction_ttest(truth, truth); }) == ErrorKind::kDegenerate);
}

TEST_CASE("forecasts are reported in sales units") {
    Network net(small_dense_spec());
    net.init(RandomSource(1));
    const FeatureMatrix fm = standardize(encode_cyclic(synthetic_days("2013-04-30")), NormalizationStats{20.0, 5.0});
    const WindowSet w = make_windows(fm, {0, 90}, SplitTag::kTest);
    const NormalizationStats stats{20.0, 5.0};
    const Forecast f = forecast(net, w, stats);
    const Tensor z = net.predict_batch(w.inputs);
    CHECK(f.pred[7] == doctest::Approx(20.0 + 5.0 * z[7]).epsilon(1e-14));
    CHECK(f.truth[0] == doctest::Approx(fm.raw_sales[30]).epsilon(1e-12));

    const MetricsRow row = evaluate_split(net, w, stats, "small");
    CHECK(row.split == "test");
    CHECK(row.metrics.mse == doctest::Approx(25.0 * row.loss).epsilon(1e-10));
    const std::string csv = metrics_csv({row});
    CHECK(csv.rfind("model,split,loss,mse,rmse,mae,mape,theils_u\nsmall,test,", 0) == 0);
}

TEST_CASE("cross-validated t-test") {
    const FeatureMatrix raw = encode_cyclic(synthetic_days("2013-07-19"));
    REQUIRE(raw.rows() == 200);
    TrainConfig cfg;
    cfg.epochs = 2;
    const ModelFactory a = [](const RandomSource& rng) {
        Network n(small_dense_spec());
        n.init(rng);
        return n;
    };
    const ModelFactory b = [](const RandomSource& rng) {
        NetworkSpec s = small_dense_spec();
        s.branches[0].layers[0] = LayerConfig::dense(8, Activation::kRelu);
        Network n(std::move(s));
        n.init(rng);
        return n;
    };
    const CvResult r = cv_ttest(a, b, raw, 2, CvMetric::kMSE, cfg);
    CHECK(r.test.df == 1.0);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.folds[0].held_out.begin == 0);
    CHECK(r.folds[0].held_out.end == 100);
    CHECK(r.folds[1].held_out.end == 200);
    CHECK(r.folds[0].a > 0.0);
    CHECK(r.test.p >= 0.0);
    CHECK(r.test.p <= 1.0);

    const CvResult again = cv_ttest(a, b, raw, 2, CvMetric::kMSE, cfg);
    CHECK(again.folds[1].b == r.folds[1].b);
    CHECK(r.csv().rfind("fold,begin,end,model_a,model_b\n", 0) == 0);

    CHECK(kind_of([&] { cv_ttest(a, a, raw, 2, CvMetric::kMAE, cfg); }) == ErrorKind::kDegenerate);
    CHECK(kind_of([&] { cv_ttest(a, b, raw, 4, CvMetric::kMSE, cfg); }) == ErrorKind::kSplit);
    CHECK(kind_of([&] { cv_ttest(a, b, raw, 1, CvMetric::kMSE, cfg); }) == ErrorKind::kConfig);
    CHECK(cv_metric_from_string("MAPE") == CvMetric::kMAPE);
    CHECK(kind_of([] { cv_metric_from_string("r2"); }) == ErrorKind::kConfig);
}

TEST_CASE("benchmark and ablation reports") {
    const PreparedData data = prepare(synthetic_days("2014-12-31"));
    TrainConfig cfg;
    cfg.epochs = 1;
    std::vector<std::string> seen;
    const BenchmarkReport rep = benchmark({"FCN"}, data, cfg, [&](const std::string& m) { seen.push_back(m); });
    CHECK(seen == std::vector<std::string>{"FCN"});
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].split == "val");
    CHECK(rep.rows[1].split == "test");
    REQUIRE(rep.efficiency.size() == 1);
    CHECK(rep.efficiency[0].params == 6145);
    CHECK(rep.efficiency[0].theils_u == rep.rows[1].theils_u);
    CHECK(rep.efficiency[0].train_ms > 0.0);
    CHECK(rep.efficiency_csv().rfind("model,theils_u,params,train_ms,inference_ms\nFCN,", 0) == 0);
    CHECK(kind_of([&] { benchmark({}, data, cfg); }) == ErrorKind::kConfig);

    const Network fcn = build_and_fit("FCN", data.train, data.val, cfg);
    const AblationRow row = score_variant("FCN", fcn, data, true);
    CHECK(row.metrics.mse == doctest::Approx(rep.rows[1].metrics.mse).epsilon(1e-12));

    AblationReport ab;
    ab.rows = {{"x", false, 1.0, {.mse = 3.0}}, {"y", true, 1.0, {.mse = 2.0}}, {"z", false, 1.0, {.mse = 2.5}}};
    CHECK(ab.best_mse_row() == 1);
    CHECK(ab.csv().rfind("variant,loss,mse,rmse,mae,mape,reference\nx,1,3,0,0,0,0\n", 0) == 0);
}
