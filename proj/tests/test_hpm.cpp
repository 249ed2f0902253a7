#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "weno/dataset.hpp"
#include "weno/hpm.hpp"

using namespace weno;

namespace {

Bag make_bag(long id, std::vector<int> labels) {
    Bag b;
    b.bag_id = id;
    long iid = 0;
    for (int lab : labels) {
        Instance inst;
        inst.features = {0.0f};
        inst.true_label = lab;
        inst.instance_id = iid++;
        b.instances.push_back(std::move(inst));
    }
    b.label = bag_label(labels);
    return b;
}

}  // namespace

TEST_CASE("mining activates exactly at the warm-up boundary") {
    HpmConfig cfg;
    cfg.warmup_epochs = 150;
    CHECK_FALSE(hpm_active(0, cfg));
    CHECK_FALSE(hpm_active(149, cfg));
    CHECK(hpm_active(150, cfg));
    CHECK(hpm_active(151, cfg));

    cfg.warmup_epochs = 0;
    CHECK(hpm_active(0, cfg));

    CHECK_THROWS_AS(hpm_active(-1, cfg), std::invalid_argument);
}

TEST_CASE("threshold 0.8 drops only the 0.95 instance") {
    HpmConfig cfg;
    cfg.threshold = 0.8;
    Bag bag = make_bag(1, {1, 0, 0});
    const auto view = filter_bag(bag, {0.95f, 0.5f, 0.2f}, cfg);
    CHECK(view.bag_id == 1);
    CHECK(view.surviving == std::vector<long>{1, 2});
    CHECK(view.dropped == std::vector<long>{0});
}

TEST_CASE("the minimum-surviving floor keeps the lowest scorer") {
    HpmConfig cfg;
    cfg.threshold = 0.1;
    cfg.min_surviving = 1;
    Bag bag = make_bag(2, {1, 1, 1});
    const auto view = filter_bag(bag, {0.9f, 0.8f, 0.7f}, cfg);
    CHECK(view.surviving == std::vector<long>{2});
    CHECK(view.dropped == std::vector<long>{0, 1});
}

TEST_CASE("a score exactly at the threshold survives") {
    HpmConfig cfg;
    cfg.threshold = 0.8;
    Bag bag = make_bag(3, {1, 0});
    const auto view = filter_bag(bag, {0.8f, 0.80001f}, cfg);
    CHECK(std::find(view.surviving.begin(), view.surviving.end(), 0) != view.surviving.end());
    CHECK(view.dropped == std::vector<long>{1});
}

TEST_CASE("negative bags pass through untouched") {
    HpmConfig cfg;
    Bag bag = make_bag(4, {0, 0, 0});
    const auto view = filter_bag(bag, {0.99f, 0.99f, 0.99f}, cfg);
    CHECK(view.surviving == std::vector<long>{0, 1, 2});
    CHECK(view.dropped.empty());
}

TEST_CASE("filtering validates scores and configuration") {
    HpmConfig cfg;
    Bag bag = make_bag(5, {1, 0});
    CHECK_THROWS_AS(filter_bag(bag, {0.5f}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(filter_bag(bag, {0.5f, 1.5f}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(filter_bag(bag, {0.5f, -0.1f}, cfg), std::invalid_argument);

    HpmConfig bad = cfg;
    bad.threshold = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.threshold = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.warmup_epochs = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.min_surviving = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    Bag empty;
    empty.bag_id = 6;
    empty.label = 1;
    CHECK_THROWS_AS(filter_bag(empty, {}, cfg), std::invalid_argument);
}

TEST_CASE("random bags: filtering never empties a bag and never drops below-threshold instances") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<float> score_dist(0.0f, 1.0f);
    std::uniform_real_distribution<double> tau_dist(0.05, 0.95);
    std::uniform_int_distribution<int> size_dist(1, 30);
    std::uniform_int_distribution<int> min_dist(1, 4);

    for (int rep = 0; rep < 300; ++rep) {
        const int n = size_dist(rng);
        HpmConfig cfg;
        cfg.threshold = tau_dist(rng);
        cfg.min_surviving = min_dist(rng);

        std::vector<int> labels(static_cast<std::size_t>(n), 0);
        labels[0] = 1;
        Bag bag = make_bag(rep, labels);
        std::vector<float> scores(static_cast<std::size_t>(n));
        for (auto& s : scores) s = score_dist(rng);

        const auto view = filter_bag(bag, scores, cfg);

        // partition: surviving + dropped covers every index exactly once
        REQUIRE(view.surviving.size() + view.dropped.size() == static_cast<std::size_t>(n));
        CHECK_FALSE(view.surviving.empty());
        CHECK(std::is_sorted(view.surviving.begin(), view.surviving.end()));
        CHECK(std::is_sorted(view.dropped.begin(), view.dropped.end()));
        std::vector<long> all = view.surviving;
        all.insert(all.end(), view.dropped.begin(), view.dropped.end());
        std::sort(all.begin(), all.end());
        for (long i = 0; i < n; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

        // retention count oracle: keep max(min_surviving, count(score <= tau)), capped at n
        long below = 0;
        for (float s : scores)
            if (static_cast<double>(s) <= cfg.threshold) ++below;
        const long expect_keep =
            std::min<long>(n, std::max<long>(cfg.min_surviving, below));
        CHECK(static_cast<long>(view.surviving.size()) == expect_keep);

        // nothing at or below the threshold is ever dropped
        for (long idx : view.dropped)
            CHECK(static_cast<double>(scores[static_cast<std::size_t>(idx)]) > cfg.threshold);

        // every survivor scores no higher than every dropped instance
        if (!view.dropped.empty()) {
            float max_surv = 0.0f;
            for (long idx : view.surviving)
                max_surv = std::max(max_surv, scores[static_cast<std::size_t>(idx)]);
            float min_drop = 1.0f;
            for (long idx : view.dropped)
                min_drop = std::min(min_drop, scores[static_cast<std::size_t>(idx)]);
            CHECK(max_surv <= min_drop);
        }
    }
}
