#include <cmath>
#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "fourphase/dataset.hpp"
#include "fourphase/error.hpp"
#include "test_util.hpp"

using namespace fourphase;
using testutil::kPi;

TEST_CASE("build places two unit points at the requested angle") {
    const Dataset ds = testutil::ref_dataset();
    CHECK(ds.p() == doctest::Approx(4.0));
    CHECK(std::abs(ds.x_plus.norm() - 1.0) < 1e-12);
    CHECK(std::abs(ds.x_minus.norm() - 1.0) < 1e-12);
    CHECK(std::abs(ds.x_plus.dot(ds.x_minus) - std::cos(kPi / 15.0)) < 1e-12);
    CHECK(ds.dim() == 20);
}

TEST_CASE("build rejects p cos(delta) <= 1 and dim < 2") {
    CHECK_THROWS_AS(build(DatasetSpec{kPi / 2.0, 12, 3, 20, 1}), AssumptionViolation);
    CHECK_THROWS_AS(build(DatasetSpec{kPi / 15.0, 3, 3, 20, 1}), AssumptionViolation);
    CHECK_THROWS_AS(build(DatasetSpec{kPi / 15.0, 12, 3, 1, 1}), BadDimension);
}

TEST_CASE("build is deterministic in the seed and the seed moves the plane") {
    const Dataset a = build(testutil::ref_spec());
    const Dataset b = build(testutil::ref_spec());
    CHECK(a.x_plus == b.x_plus);
    CHECK(a.x_minus == b.x_minus);
    DatasetSpec other = testutil::ref_spec();
    other.seed = 2;
    CHECK((build(other).x_plus - a.x_plus).norm() > 1e-3);
}

TEST_CASE("key directions at a right angle swap the points") {
    const Dataset ds = build_unchecked(DatasetSpec{kPi / 2.0, 12, 3, 20, 3});
    const KeyDirections kd = key_directions(ds);
    CHECK((kd.x_plus_perp - ds.x_minus).norm() < 1e-12);
    CHECK((kd.x_minus_perp - ds.x_plus).norm() < 1e-12);
}

TEST_CASE("label average direction is positive on both points over a grid") {
    for (double delta : {0.05, 0.2, kPi / 15.0, 0.6, 1.0, 1.3}) {
        for (int np : {2, 4, 7, 12, 40}) {
            const DatasetSpec spec{delta, np, 1, 8, 5};
            if (!(spec.p() * std::cos(delta) > 1.0)) continue;
            const Dataset ds = build(spec);
            const KeyDirections kd = key_directions(ds);
            CHECK(kd.mu.dot(ds.x_plus) > 0.0);
            CHECK(kd.mu.dot(ds.x_minus) > 0.0);
            CHECK(std::abs(kd.mu.norm() - 1.0) < 1e-12);
            CHECK(std::abs(kd.x_plus_perp.dot(ds.x_plus)) < 1e-12);
            CHECK(std::abs(kd.x_minus_perp.dot(ds.x_minus)) < 1e-12);
            // in-plane residual
            const Eigen::VectorXd e1 = ds.plane_e1(), e2 = ds.plane_e2();
            const Eigen::VectorXd r = kd.x_plus_perp - kd.x_plus_perp.dot(e1) * e1 - kd.x_plus_perp.dot(e2) * e2;
            CHECK(r.norm() < 1e-12);
        }
    }
}

TEST_CASE("margin is sin(delta/2)") {
    CHECK(margin(build_unchecked(DatasetSpec{kPi / 3.0, 12, 3, 4, 1})) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(margin(testutil::ref_dataset()) == doctest::Approx(0.104528).epsilon(1e-5));
    double prev = 1.0;
    for (double d = 1.0; d > 1e-4; d /= 2.0) {
        const double mg = margin(build_unchecked(DatasetSpec{d, 12, 3, 4, 1}));
        CHECK(std::abs(mg - std::sin(d / 2.0)) < 1e-15);
        CHECK(mg < prev);
        prev = mg;
    }
}

TEST_CASE("noisy variant keeps one exact copy per class and rotates the rest in-plane") {
    const Dataset ds = testutil::ref_dataset();
    const auto samples = noisy_variant(ds, 7);
    REQUIRE(samples.size() == 15);
    int pos = 0, neg = 0, moved_pos = 0, moved_neg = 0;
    const Eigen::VectorXd e1 = ds.plane_e1(), e2 = ds.plane_e2();
    for (const auto& s : samples) {
        CHECK(std::abs(s.point.norm() - 1.0) < 1e-12);
        const Eigen::VectorXd r = s.point - s.point.dot(e1) * e1 - s.point.dot(e2) * e2;
        CHECK(r.norm() < 1e-12);
        const Eigen::VectorXd& base = s.label > 0 ? ds.x_plus : ds.x_minus;
        const double dev = std::acos(std::clamp(s.point.dot(base), -1.0, 1.0));
        CHECK(dev <= ds.spec.delta / 4.0 + 1e-9);
        const bool moved = (s.point - base).norm() > 0.0;
        if (s.label > 0) {
            ++pos;
            moved_pos += moved;
        } else {
            ++neg;
            moved_neg += moved;
        }
    }
    CHECK(pos == 12);
    CHECK(neg == 3);
    CHECK(moved_pos == 11);
    CHECK(moved_neg == 2);

    const auto again = noisy_variant(ds, 7);
    for (std::size_t i = 0; i < samples.size(); ++i) CHECK(samples[i].point == again[i].point);
}

TEST_CASE("training set weights follow class counts") {
    const TrainingSet ts = training_set(testutil::ref_dataset());
    REQUIRE(ts.size() == 2);
    CHECK(ts.weights(0) == doctest::Approx(0.8));
    CHECK(ts.weights(1) == doctest::Approx(0.2));
    CHECK(ts.labels(0) == 1.0);
    CHECK(ts.labels(1) == -1.0);
    const TrainingSet noisy = training_set(noisy_variant(testutil::ref_dataset(), 3));
    CHECK(noisy.size() == 15);
    CHECK(noisy.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("dataset record round-trips exactly") {
    const Dataset ds = testutil::ref_dataset();
    const Record r = to_record(ds);
    std::ostringstream os;
    r.write(os);
    const Dataset back = dataset_from_record(Record::parse_string(os.str()));
    CHECK(back.x_plus == ds.x_plus);
    CHECK(back.x_minus == ds.x_minus);
    CHECK(back.spec.n_plus == 12);
    CHECK(back.spec.delta == ds.spec.delta);
}
