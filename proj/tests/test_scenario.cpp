#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"

#include "abmcal/errors.hpp"
#include "abmcal/rng.hpp"
#include "abmcal/scalers.hpp"
#include "abmcal/scenario.hpp"

using namespace abmcal;

namespace {

Scenario scenario_with(std::vector<int> curve, int n, double p_recov) {
  Scenario s;
  s.params = {n, curve.empty() ? 0 : curve[0], 10.0, 0.02, p_recov, 0.02 * 10.0 / p_recov};
  s.curve = EpiCurve(std::move(curve));
  return s;
}

}  // namespace

TEST_CASE("p_tran follows from R0, p_recov and c_rate") {
  CHECK(2.0 * 0.1 / 10.0 == doctest::Approx(0.02));
  CHECK(5.0 * 0.25 / 5.0 == 0.25);
}

TEST_CASE("prior draws stay inside the box and keep the identity") {
  PriorConfig prior;
  auto eng = make_engine(2024);
  double c_sum = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto p = sample_params(prior, eng);
    CHECK((p.n >= 5000 && p.n <= 10000));
    CHECK((p.p_recov >= 0.071 && p.p_recov <= 0.25));
    CHECK((p.i0 >= 100 && p.i0 <= 2000));
    CHECK((p.r0 >= 1.0 && p.r0 <= 5.0));
    CHECK((p.c_rate >= 5.0 && p.c_rate <= 15.0));
    CHECK((p.p_tran > 0.0 && p.p_tran <= 1.0));
    CHECK(std::abs(p.r0 * p.p_recov - p.p_tran * p.c_rate) <= 1e-12);
    c_sum += p.c_rate;
  }
  CHECK(std::abs(c_sum / draws - 10.0) < 0.1);
}

TEST_CASE("invalid priors are rejected") {
  PriorConfig prior;
  prior.c_rate = {15.0, 5.0};
  CHECK_THROWS_AS(prior.validate(), std::invalid_argument);
  PriorConfig too_many_seeds;
  too_many_seeds.i0 = {100.0, 6000.0};
  CHECK_THROWS_AS(too_many_seeds.validate(), std::invalid_argument);
}

TEST_CASE("dataset generation") {
  PriorConfig prior;
  const auto one = generate_dataset(1, 60, prior, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].curve.horizon() == 60);
  CHECK(one[0].curve.total() <= one[0].params.n);
  CHECK(one[0].curve == simulate(one[0].params, 60, one[0].seed));

  const auto a = generate_dataset(20, 60, prior, 5, 1);
  const auto b = generate_dataset(20, 60, prior, 5, 3);
  CHECK(dataset_to_csv(a) == dataset_to_csv(b));
  CHECK(dataset_to_csv(a) != dataset_to_csv(generate_dataset(20, 60, prior, 6)));
  CHECK_THROWS_AS(generate_dataset(0, 60, prior, 5), std::invalid_argument);
}

TEST_CASE("test-set shape matches the study size") {
  const auto data = generate_dataset(1000, 60, PriorConfig{}, 99, 0);
  CHECK(data.size() == 1000);
  for (const auto& s : data) CHECK(s.curve.horizon() == 60);
}

TEST_CASE("dataset csv round-trips bit-exactly") {
  const auto data = generate_dataset(15, 30, PriorConfig{}, 8);
  const auto text = dataset_to_csv(data);
  const auto back = dataset_from_csv(text);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].seed == data[i].seed);
    CHECK(back[i].curve == data[i].curve);
    CHECK(back[i].params.p_tran == data[i].params.p_tran);
    CHECK(back[i].params.c_rate == data[i].params.c_rate);
    CHECK(back[i].params.r0 == data[i].params.r0);
    CHECK(back[i].params.p_recov == data[i].params.p_recov);
    CHECK(back[i].params.n == data[i].params.n);
  }
  CHECK(dataset_to_csv(back) == text);
  CHECK_THROWS_AS(dataset_from_csv("nonsense\n1,2\n"), SchemaError);
}

TEST_CASE("split is seeded and disjoint") {
  const auto data = generate_dataset(50, 10, PriorConfig{}, 3);
  const auto s = split_dataset(data, 0.1, 4);
  CHECK(s.train.size() == 45);
  CHECK(s.validation.size() == 5);
  std::set<std::uint64_t> seeds;
  for (const auto& x : s.train) seeds.insert(x.seed);
  for (const auto& x : s.validation) seeds.insert(x.seed);
  CHECK(seeds.size() == 50);
  CHECK(dataset_to_csv(split_dataset(data, 0.1, 4).validation) == dataset_to_csv(s.validation));
}

TEST_CASE("scaler fitting") {
  SUBCASE("global incidence extrema") {
    const std::vector<Scenario> train{scenario_with({0, 5, 10}, 5000, 0.1),
                                      scenario_with({3, 4, 2}, 10000, 0.2)};
    const auto s = fit_scalers(train);
    CHECK(s.incidence == MinMax{0.0, 10.0});
    CHECK(s.n == MinMax{5000.0, 10000.0});
    CHECK(s.p_recov == MinMax{0.1, 0.2});
  }
  SUBCASE("constant feature fails") {
    const std::vector<Scenario> train{scenario_with({0, 5, 10}, 5000, 0.1),
                                      scenario_with({3, 4, 2}, 5000, 0.2)};
    CHECK_THROWS_AS(fit_scalers(train), std::invalid_argument);
    CHECK_THROWS_AS(fit_scalers(std::vector<Scenario>{}), std::invalid_argument);
  }
  SUBCASE("training data scales into the unit interval, idempotently") {
    const auto data = generate_dataset(40, 60, PriorConfig{}, 12);
    const auto s = fit_scalers(data);
    std::vector<double> scaled_inc, scaled_n, scaled_g;
    for (const auto& x : data) {
      const auto in = encode_input(observe(x), s, 60);
      for (double v : in.sequence) {
        CHECK((v >= 0.0 && v <= 1.0));
        scaled_inc.push_back(v);
      }
      scaled_n.push_back(in.n);
      scaled_g.push_back(in.p_recov);
    }
    CHECK(fit_min_max(scaled_inc, "incidence") == MinMax{0.0, 1.0});
    CHECK(fit_min_max(scaled_n, "n") == MinMax{0.0, 1.0});
    CHECK(fit_min_max(scaled_g, "p_recov") == MinMax{0.0, 1.0});
  }
}

TEST_CASE("input encoding") {
  Scalers s{{0.0, 100.0}, {5000.0, 10000.0}, {0.071, 0.25}};
  const Scalers before = s;
  SUBCASE("endpoints") {
    const auto in = encode_input({EpiCurve({0, 100}), 5000, 0.25}, s, 2);
    CHECK(in.sequence == std::vector<double>{0.0, 1.0});
    CHECK(in.n == 0.0);
    CHECK(in.p_recov == 1.0);
  }
  SUBCASE("all zero") {
    const auto in = encode_input({EpiCurve(std::vector<int>(60, 0)), 7000, 0.1}, s, 60);
    for (double v : in.sequence) CHECK(v == 0.0);
  }
  SUBCASE("no clipping outside the training range") {
    const auto in = encode_input({EpiCurve({250, 0}), 12000, 0.3}, s, 2);
    CHECK(in.sequence[0] == 2.5);
    CHECK(in.n > 1.0);
  }
  SUBCASE("padding and horizon checks") {
    CHECK_THROWS_AS(encode_input({EpiCurve({1, 2}), 6000, 0.1}, s, 3), std::invalid_argument);
    CHECK_THROWS_AS(encode_input({EpiCurve({1, 2, 3, 4}), 6000, 0.1}, s, 3, true),
                    std::invalid_argument);
    const auto in = encode_input({EpiCurve({1, 2}), 6000, 0.1}, s, 4, true);
    CHECK(in.sequence.size() == 4);
    CHECK(in.mask == std::vector<std::uint8_t>{1, 1, 0, 0});
    CHECK(in.sequence[2] == 0.0);
  }
  SUBCASE("decode inverts encode") {
    const auto data = generate_dataset(10, 60, PriorConfig{}, 21);
    const auto fitted = fit_scalers(data);
    for (const auto& x : data) {
      const auto raw = decode_input(encode_input(observe(x), fitted, 60), fitted);
      for (int t = 0; t < 60; ++t) {
        CHECK(std::abs(raw.incidence[t] - x.curve.incidence[t]) <= 1e-12 * (1 + x.curve.incidence[t]));
      }
      CHECK(std::abs(raw.n - x.params.n) <= 1e-12 * x.params.n);
      CHECK(std::abs(raw.p_recov - x.params.p_recov) <= 1e-12);
    }
  }
  CHECK(s == before);
}

TEST_CASE("scalers json round-trip") {
  Scalers s{{0.0, 1234.0}, {5001.0, 9999.0}, {0.0710000001, 0.2499}};
  CHECK(scalers_from_json(scalers_to_json(s)) == s);
  CHECK_THROWS_AS(scalers_from_json("{\"incidence\":"), SchemaError);
}
