#include <doctest.h>

#include <cmath>

#include "ddi/errors.hpp"
#include "ddi/num/adam.hpp"

using namespace ddi;
using num::AdamState;
using num::StepSchedule;
using num::Tensor;

TEST_CASE("step schedule halves every period") {
  StepSchedule s{0.001, 0.5, 20};
  CHECK(s.lr(0) == doctest::Approx(0.001));
  CHECK(s.lr(19) == doctest::Approx(0.001));
  CHECK(s.lr(20) == doctest::Approx(0.0005));
  CHECK(s.lr(39) == doctest::Approx(0.0005));
  CHECK(s.lr(40) == doctest::Approx(0.00025));
  CHECK(s.lr(60) == doctest::Approx(0.000125));
}

TEST_CASE("first update moves by ~lr against the gradient sign") {
  // bias correction makes m-hat = g and v-hat = g^2 on step one, so the
  // update is lr * g / (|g| + eps) independent of the gradient magnitude
  Tensor<double> p(1, 2);
  p.v = {1.0, -2.0};
  Tensor<double> g(1, 2);
  g.v = {3.0, -0.25};
  AdamState<double> st(1, 2);
  StepSchedule sched{0.001, 0.5, 20};
  num::adam_step(p, g, st, sched, 0);
  CHECK(p.v[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-7));
  CHECK(p.v[1] == doctest::Approx(-2.0 + 0.001).epsilon(1e-7));
  CHECK(st.step == 1);
}

TEST_CASE("constant gradient: every update equals lr * sign(g)") {
  Tensor<double> p(1, 1);
  p.v = {0.5};
  Tensor<double> g(1, 1);
  g.v = {2.0};
  AdamState<double> st(1, 1);
  StepSchedule sched{0.01, 0.5, 20};
  for (int k = 1; k <= 5; ++k) {
    double before = p.v[0];
    num::adam_step(p, g, st, sched, 0);
    // with g constant, m-hat = g and v-hat = g^2 at every step
    CHECK(before - p.v[0] == doctest::Approx(0.01 * 2.0 / (2.0 + st.eps))
                                 .epsilon(1e-10));
  }
}

TEST_CASE("zero gradient leaves the parameter unchanged") {
  Tensor<double> p(2, 2);
  p.fill(1.25);
  Tensor<double> g(2, 2);
  AdamState<double> st(2, 2);
  StepSchedule sched{0.001, 0.5, 20};
  num::adam_step(p, g, st, sched, 0);
  for (double x : p.v) CHECK(x == 1.25);
}

TEST_CASE("the epoch argument selects the scheduled rate") {
  Tensor<double> p(1, 1);
  p.v = {0.0};
  Tensor<double> g(1, 1);
  g.v = {1.0};
  AdamState<double> st(1, 1);
  StepSchedule sched{0.001, 0.5, 20};
  num::adam_step(p, g, st, sched, 40);
  CHECK(-p.v[0] == doctest::Approx(0.00025).epsilon(1e-6));
}

TEST_CASE("shape mismatches are rejected") {
  Tensor<double> p(1, 2), g(2, 1);
  AdamState<double> st(1, 2);
  StepSchedule sched;
  CHECK_THROWS_AS(num::adam_step(p, g, st, sched, 0), ShapeMismatch);
  AdamState<double> wrong(3, 3);
  Tensor<double> g2(1, 2);
  CHECK_THROWS_AS(num::adam_step(p, g2, wrong, sched, 0), ShapeMismatch);
}
