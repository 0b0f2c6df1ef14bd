#include <gtest/gtest.h>

#include "banditstop/errors.hpp"
#include "banditstop/schedule.hpp"

using banditstop::Schedule;

TEST(Schedule, Constant) {
  const auto s = Schedule::constant(0.2);
  EXPECT_EQ(s.at(1), 0.2);
  EXPECT_EQ(s.at(1000), 0.2);
  EXPECT_EQ(s.limit(), 0.2);
  EXPECT_TRUE(s.nonincreasing_through(100));
}

TEST(Schedule, PowerWithFloor) {
  const auto s = Schedule::power(0.5, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(s.at(1), 0.5);
  EXPECT_DOUBLE_EQ(s.at(2), 0.25);
  EXPECT_DOUBLE_EQ(s.at(10), 0.1);
  EXPECT_DOUBLE_EQ(s.at(100), 0.1);
  EXPECT_DOUBLE_EQ(s.limit(), 0.1);
  EXPECT_TRUE(s.nonincreasing_through(1000));
}

TEST(Schedule, ExplicitRepeatsLast) {
  const auto s = Schedule::explicit_values({0.4, 0.3, 0.2});
  EXPECT_EQ(s.at(1), 0.4);
  EXPECT_EQ(s.at(3), 0.2);
  EXPECT_EQ(s.at(50), 0.2);
  EXPECT_EQ(s.limit(), 0.2);
  EXPECT_FALSE(Schedule::explicit_values({0.1, 0.3}).nonincreasing_through(5));
}

TEST(Schedule, Errors) {
  EXPECT_THROW(Schedule::power(1.0, -0.5, 0.0), banditstop::ConfigError);
  EXPECT_THROW(Schedule::explicit_values({}), banditstop::ConfigError);
  EXPECT_THROW(Schedule::constant(1.0).at(0), banditstop::ContractError);
}
