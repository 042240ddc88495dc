#include "riskmdp/discretizer.hpp"
#include "riskmdp/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace riskmdp;

namespace {

FeatureRecord at_lower_bounds() {
    FeatureRecord r;
    r.http_requests = 0;
    r.unique_users = 0;
    r.req_user_ratio = 1;
    r.avg_bytes_sent = 800;
    r.avg_latency = 100;
    r.avg_response_time = 0;
    return r;
}

} // namespace

TEST_SUITE("discretizer") {

TEST_CASE("standard scheme matches the configured bins") {
    const auto s = BinningScheme::standard();
    REQUIRE(s.features.size() == kFeatureCount);
    const double lower[] = {0, 0, 1, 800, 100, 0};
    const double upper[] = {50, 50, 4, 1300, 3500, 8000};
    const double width[] = {10, 10, 0.75, 125, 850, 2000};
    const int count[] = {5, 5, 4, 4, 4, 4};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(s.features[i].lower == lower[i]);
        CHECK(s.features[i].upper == upper[i]);
        CHECK(s.features[i].width == width[i]);
        CHECK(s.features[i].count == count[i]);
        CHECK_FALSE(s.features[i].categorical);
    }
    CHECK(s.features[kDosFeature].categorical);
    CHECK(s.features[kDosFeature].count == kDosCodes);
    CHECK_NOTHROW(s.validate_record_layout());
}

TEST_CASE("state space sizes") {
    CHECK(state_space_size(BinningScheme::standard()) == 51200);

    BinningScheme binary7;
    for (int i = 0; i < 7; ++i)
        binary7.features.push_back({"f" + std::to_string(i), 0, 2, 1, 2, false});
    CHECK(state_space_size(binary7) == 128);

    BinningScheme single{{{"x", 0, 4, 1, 4, false}}};
    CHECK(state_space_size(single) == 4);

    CHECK(state_space_size(BinningScheme::binary()) == 512);
}

TEST_CASE("bin codes") {
    const auto s = BinningScheme::standard();
    auto r = at_lower_bounds();
    r.http_requests = 23;
    CHECK(discretize(r, s).codes[0] == 2);

    CHECK(discretize(at_lower_bounds(), s) == DiscreteState{});

    r = at_lower_bounds();
    r.dos = {true, false, true};
    CHECK(discretize(r, s).codes[kDosFeature] == 5);
    CHECK(dos_code({true, true, true}) == 7);
    CHECK(dos_code({false, true, false}) == 2);
}

TEST_CASE("boundaries are half open with a closed top bin and clipping") {
    const auto& req = BinningScheme::standard().features[0];
    CHECK(req.code(9.999) == 0);
    CHECK(req.code(10.0) == 1);
    CHECK(req.code(50.0) == 4);
    CHECK(req.code(1e9) == 4);
    CHECK(req.code(-3.0) == 0);

    // ratio: 4 bins of 0.75 over [1, 4) cover only [1, 4); top bin absorbs the rest
    const auto& ratio = BinningScheme::standard().features[2];
    CHECK(ratio.code(1.0) == 0);
    CHECK(ratio.code(1.75) == 1);
    CHECK(ratio.code(3.25) == 3);
    CHECK(ratio.code(3.99) == 3);
    CHECK(ratio.code(4.0) == 3);
    CHECK(ratio.code(0.0) == 0);
}

TEST_CASE("discretize is monotone per feature") {
    const auto s = BinningScheme::standard();
    std::mt19937_64 rng(3);
    for (std::size_t f = 0; f < 6; ++f) {
        const auto& b = s.features[f];
        std::uniform_real_distribution<double> value(b.lower - b.width, b.upper + b.width);
        for (int i = 0; i < 500; ++i) {
            double a = value(rng), c = value(rng);
            if (a > c)
                std::swap(a, c);
            CHECK(b.code(a) <= b.code(c));
        }
    }
}

TEST_CASE("mixed radix index") {
    const auto s = BinningScheme::standard();
    CHECK(state_index(DiscreteState{{4, 4, 3, 3, 3, 3, 7}}, s) == 51199);
    CHECK(state_index(DiscreteState{{0, 0, 0, 0, 0, 0, 1}}, s) == 1);
    // ((((((1*5+2)*4+3)*4+0)*4+1)*4+2)*8+5) by hand
    CHECK(state_index(DiscreteState{{1, 2, 3, 0, 1, 2, 5}}, s) == (((((7 * 4 + 3) * 4 + 0) * 4 + 1) * 4 + 2) * 8 + 5));
    CHECK_THROWS_AS(state_from_index(51200, s), std::out_of_range);
}

TEST_CASE("enumeration is an index bijection") {
    const auto s = BinningScheme::standard();
    const auto states = enumerate_states(s);
    REQUIRE(states.size() == 51200);
    CHECK(states.front() == DiscreteState{});
    CHECK(states.back() == DiscreteState{{4, 4, 3, 3, 3, 3, 7}});
    for (std::size_t i = 0; i < states.size(); ++i) {
        REQUIRE(state_index(states[i], s) == i);
        REQUIRE(state_from_index(i, s) == states[i]);
    }
    CHECK_THROWS_AS(enumerate_states(s, 1000), ConfigError);
}

TEST_CASE("simulated trajectories stay within declared code ranges") {
    const auto s = BinningScheme::standard();
    const auto radix = s.radices();
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        SimulationConfig c;
        c.seed = rng();
        c.attack_schedule = default_attack_schedule(c.duration_steps);
        const auto traj = discretize_all(simulate(c), s);
        REQUIRE(traj.states.size() == 300);
        for (std::size_t i = 0; i < traj.states.size(); ++i) {
            for (std::size_t f = 0; f < kFeatureCount; ++f) {
                CHECK(traj.states[i].codes[f] >= 0);
                CHECK(traj.states[i].codes[f] < radix[f]);
            }
            CHECK(traj.indices[i] == state_index(traj.states[i], s));
        }
    }
}

TEST_CASE("invalid schemes are rejected") {
    BinningScheme s = BinningScheme::standard();
    s.features[0].count = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = BinningScheme::standard();
    s.features[1].width = 5; // 5 bins of 5 do not cover 0-50
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = BinningScheme::standard();
    s.features.pop_back();
    CHECK_THROWS_AS(s.validate_record_layout(), ConfigError);
}

TEST_CASE("trajectory csv round trip") {
    const auto s = BinningScheme::standard();
    SimulationConfig c;
    c.attack_schedule = default_attack_schedule(c.duration_steps);
    const auto traj = discretize_all(simulate(c), s);
    const auto path = std::filesystem::temp_directory_path() / "riskmdp_trajectory_test.csv";
    save_trajectory(path, traj);
    const auto back = load_trajectory(path, s);
    CHECK(back.states == traj.states);
    CHECK(back.indices == traj.indices);
    std::filesystem::remove(path);
}

}
