#include <doctest.h>

#include "binagree/errors.hpp"
#include "binagree/kvconfig.hpp"

using namespace binagree;

TEST_CASE("key-value config parsing and typed access") {
  const auto cfg = KeyValueConfig::parse(
      "# comment\n beta_1 = 2.2 \nn_subjects=50  # trailing\nflag = yes\nname = a b\nseed = 7\n"
      "beta_1 = 2.3\n");
  CHECK(cfg.get_double("beta_1") == 2.3);
  CHECK(cfg.get_int("n_subjects") == 50);
  CHECK(cfg.get_bool("flag") == true);
  CHECK(cfg.get_string("name") == "a b");
  CHECK(cfg.get_uint64("seed") == 7u);
  CHECK_FALSE(cfg.get_double("missing").has_value());
  CHECK(cfg.get_double("missing", 1.5) == 1.5);
  CHECK(cfg.unused_keys().empty());
}

TEST_CASE("key-value config errors") {
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ParseError);
  CHECK_THROWS_AS(KeyValueConfig::parse(" = 3\n"), ParseError);
  const auto cfg = KeyValueConfig::parse("x = abc\ny = 1.5\nz = maybe\n");
  CHECK_THROWS_AS(cfg.get_double("x"), DataError);
  CHECK_THROWS_AS(cfg.get_int("y"), DataError);
  CHECK_THROWS_AS(cfg.get_bool("z"), DataError);
  CHECK(cfg.unused_keys() == std::set<std::string>{});
  const auto fresh = KeyValueConfig::parse("typo_key = 1\n");
  CHECK(fresh.unused_keys() == std::set<std::string>{"typo_key"});
  CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/config.txt"), IoError);
}
