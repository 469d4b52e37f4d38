#include <random>

#include "gtest/gtest.h"
#include "stefan/field_io.hpp"

using namespace stefan;

TEST(FieldIo, HeaderFormat) {
  const Grid g(2, {0, 0, 0}, {1.0, 0.5, 1}, {4, 5, 1});
  const TemperatureField f(g, 0.25, 1.0);
  const std::string csv = field_to_csv(f);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "# grid dim=2 counts=4,5 spacing=0.25,0.10000000000000001 time=0.25");
}

TEST(FieldIo, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  const Grid g(3, {0, 0, 0}, {1.0, 2.0, 3.0}, {4, 5, 6});
  std::vector<double> v(g.size());
  for (double& x : v) x = u(rng) / 3.0;
  const TemperatureField f(g, 1.0 / 3.0, v);
  const TemperatureField back = field_from_csv(field_to_csv(f));
  EXPECT_EQ(back.time(), f.time());
  EXPECT_EQ(back.grid().counts(), g.counts());
  for (std::size_t c = 0; c < g.size(); ++c) EXPECT_EQ(back[c], f[c]);
  EXPECT_EQ(field_to_csv(back), field_to_csv(f));
}

TEST(FieldIo, RejectsMalformedInput) {
  EXPECT_THROW(field_from_csv("1\n2\n"), InvalidInput);
  EXPECT_THROW(field_from_csv("# grid dim=1 counts=4 time=0\n1\n2\n3\n4\n"), InvalidInput);
  EXPECT_THROW(field_from_csv("# grid dim=1 counts=4 spacing=0.25 time=0\n1\n2\nx\n4\n"),
               InvalidInput);
  EXPECT_THROW(field_from_csv("# grid dim=1 counts=4 spacing=0.25 time=0\n1\n2\n3\n"),
               InvalidInput);
}
