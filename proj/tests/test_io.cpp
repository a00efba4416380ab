// Apache License, Version 2.0, refer to LICENSE.txt
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "prgds/errors.hpp"
#include "prgds/hyperfile.hpp"
#include "prgds/tensor.hpp"

using namespace prgds;

namespace {

struct TempDir {
  std::filesystem::path dir;
  explicit TempDir(const std::string& name = "prgds_io") {
    dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  f << body;
}

}  // namespace

TEST_CASE("hyper text round-trips non-default values") {
  ModelHyper h;
  h.eps_theta = 0.0;
  h.eps_lambda = 0.25;
  h.alpha0 = 3.5;
  h.a0 = 0.125;
  h.b0 = 2.0;
  h.num_components = 42;
  h.stationary_rho = true;
  std::ostringstream out;
  write_hyper(out, h, std::vector<std::string>{"generated for a test"});
  std::istringstream in(out.str());
  CHECK(parse_hyper(in) == h);
  CHECK(out.str().find("# generated for a test\n") == 0);
}

TEST_CASE("hyper parsing applies defaults and tolerates comments") {
  std::istringstream in(
      "# full-line comment\n"
      "\n"
      "  K = 7   # trailing comment\n"
      "stationary_rho=1\n");
  const ModelHyper h = parse_hyper(in);
  CHECK(h.num_components == 7);
  CHECK(h.stationary_rho);
  // Everything else keeps the defaults.
  ModelHyper d;
  CHECK(h.eps_theta == d.eps_theta);
  CHECK(h.eps_lambda == d.eps_lambda);
  CHECK(h.alpha0 == d.alpha0);
  CHECK(h.a0 == d.a0);
  CHECK(h.b0 == d.b0);

  std::istringstream empty("");
  CHECK(parse_hyper(empty) == ModelHyper{});
}

TEST_CASE("hyper parsing rejects malformed input with a located message") {
  const auto expect_fail = [](const std::string& body, const std::string& part) {
    std::istringstream in(body);
    try {
      parse_hyper(in, "cfg");
      FAIL_CHECK("expected DataError for: " << body);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(part) != std::string::npos);
    }
  };
  expect_fail("K = 7\nwobble = 3\n", "cfg:2");
  expect_fail("wobble = 3\n", "unknown key");
  expect_fail("K = 7\nK = 8\n", "repeated key");
  expect_fail("a0 0.5\n", "key=value");
  expect_fail("a0 = squid\n", "malformed number");
  expect_fail("K = 1.5\n", "malformed integer");
  expect_fail("stationary_rho = maybe\n", "malformed flag");
  expect_fail("= 3\n", "empty key");
  expect_fail("a0 =\n", "empty key or value");
}

TEST_CASE("hyper file IO round-trips and reports unreadable paths") {
  TempDir tmp;
  ModelHyper h;
  h.num_components = 3;
  h.b0 = 0.75;
  write_hyper_file(h, tmp.file("hyper.txt"));
  CHECK(load_hyper_file(tmp.file("hyper.txt")) == h);
  CHECK_THROWS_AS(load_hyper_file(tmp.file("absent.txt")), DataError);
  CHECK_THROWS_AS(write_hyper_file(h, tmp.file("no/such/dir/h.txt")), DataError);
}

TEST_CASE("mask file round-trips generated and empty masks") {
  TempDir tmp;
  Rng rng(5);
  const HoldoutMask mask = make_holdout_mask(30, 4, rng);
  write_mask_file(mask, tmp.file("mask.txt"),
                  std::vector<std::string>{"seed 5"});
  CHECK(load_mask_file(tmp.file("mask.txt")) == mask);

  const HoldoutMask none = HoldoutMask::none(10);
  write_mask_file(none, tmp.file("none.txt"));
  CHECK(load_mask_file(tmp.file("none.txt")) == none);
}

TEST_CASE("mask parsing enforces the holdout shape") {
  TempDir tmp;
  const auto expect_fail = [&](const std::string& body, const std::string& part) {
    write_text(tmp.file("m.txt"), body);
    try {
      load_mask_file(tmp.file("m.txt"));
      FAIL_CHECK("expected DataError for: " << body);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(part) != std::string::npos);
    }
  };
  expect_fail("", "missing step-count header");
  expect_fail("0\n", "positive step count");
  expect_fail("10 3\n", "positive step count");
  expect_fail("10\n11 smoothing\n", "out of range");
  expect_fail("10\n5 sideways\n", "unknown subset");
  expect_fail("10\n5 smoothing extra\n", "expected 't smoothing'");
  expect_fail("10\n1 smoothing\n", "interior range");
  expect_fail("10\n9 smoothing\n", "interior range");
  expect_fail("10\n5 smoothing\n5 smoothing\n", "repeated smoothing");
  expect_fail("10\n9 forecasting\n", "last two steps");
  expect_fail("10\n8 forecasting\n9 forecasting\n", "last two steps");

  // Order in the file does not matter; comments are skipped.
  write_text(tmp.file("ok.txt"),
             "# header comment\n10\n10 forecasting\n4 smoothing\n"
             "9 forecasting\n2 smoothing\n");
  const HoldoutMask m = load_mask_file(tmp.file("ok.txt"));
  CHECK(m.smoothing == std::vector<long>{2, 4});
  CHECK(m.forecasting == std::vector<long>{9, 10});
}
