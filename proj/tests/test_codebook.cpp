#include "spanhash/codebook.hpp"

#include <cstdio>

#include "doctest.h"

using namespace spanhash;
using codebook::Codebook;

namespace {

Code code_of(const char* bits) { return Code::from_bitstring(bits); }

}  // namespace

TEST_CASE("counting and argmax table") {
  Codebook cb(3);
  cb.add(code_of("101"), "NP");
  cb.add(code_of("101"), "NP");
  cb.add(code_of("101"), "VP");
  cb.finalize();
  CHECK(cb.translate(code_of("101")) == "NP");
  CHECK(cb.total(code_of("101")) == 3);

  // Argmax ties break toward the lexicographically smaller label.
  Codebook tie(3);
  tie.add(code_of("010"), "VP");
  tie.add(code_of("010"), "NP");
  tie.finalize();
  CHECK(tie.translate(code_of("010")) == "NP");
}

TEST_CASE("translate fallback by Hamming distance") {
  Codebook cb(4);
  for (int i = 0; i < 10; ++i) cb.add(code_of("1100"), "A");
  for (int i = 0; i < 3; ++i) cb.add(code_of("0011"), "B");
  cb.finalize();

  // Distance 1 from a unique nearest code.
  CHECK(cb.translate(code_of("1101")) == "A");
  CHECK(cb.translate(code_of("0111")) == "B");
  // Equidistant: higher total frequency wins (10 vs 3).
  CHECK(cb.translate(code_of("0110")) == "A");
  CHECK(cb.fallback_uses() == 3);

  // Equidistant and equal totals: lexicographically smaller code.
  Codebook even(2);
  even.add(code_of("00"), "X");
  even.add(code_of("11"), "Y");
  even.finalize();
  CHECK(even.translate(code_of("01")) == "X");

  Codebook empty(2);
  CHECK_THROWS_AS(empty.translate(code_of("00")), codebook::EmptyCodebook);
}

TEST_CASE("coverage report truncates at cumulative 90 percent") {
  Codebook cb(4);
  for (int i = 0; i < 100; ++i) cb.add(code_of("1000"), "ONE");
  for (int i = 0; i < 60; ++i) cb.add(code_of("0100"), "SPLIT");
  for (int i = 0; i < 40; ++i) cb.add(code_of("0010"), "SPLIT");
  for (int i = 0; i < 95; ++i) cb.add(code_of("0001"), "TOP90");
  for (int i = 0; i < 5; ++i) cb.add(code_of("1111"), "TOP90");
  cb.finalize();

  auto rows = cb.coverage_report();
  int one_rows = 0, split_rows = 0, top_rows = 0;
  for (const auto& r : rows) {
    if (r.label == "ONE") {
      ++one_rows;
      CHECK(r.percent == doctest::Approx(100.0));
    }
    if (r.label == "SPLIT") ++split_rows;
    if (r.label == "TOP90") ++top_rows;
    CHECK(r.percent > 0.0);
    CHECK(r.percent <= 100.0);
  }
  CHECK(one_rows == 1);
  CHECK(split_rows == 2);  // 60 then 40: 90% needs both
  CHECK(top_rows == 1);    // 95% alone crosses the threshold
}

TEST_CASE("save and load round trip") {
  Codebook cb(4);
  for (int i = 0; i < 7; ++i) cb.add(code_of("1010"), "NP");
  for (int i = 0; i < 2; ++i) cb.add(code_of("1010"), "VP");
  for (int i = 0; i < 4; ++i) cb.add(code_of("0101"), "VP");
  cb.finalize();

  std::string path = "test_codebook_tmp.json";
  cb.save(path);
  Codebook loaded = Codebook::load(path);
  std::remove(path.c_str());

  CHECK(loaded.k() == 4);
  CHECK(loaded.translate(code_of("1010")) == "NP");
  CHECK(loaded.translate(code_of("0101")) == "VP");
  CHECK(loaded.total(code_of("1010")) == 9);
  // Fallback behavior survives the round trip (totals preserved).
  CHECK(loaded.translate(code_of("1011")) == "NP");
}

TEST_CASE("code rendering") {
  Code c = code_of("110110001000");
  CHECK(c.width == 12);
  CHECK(c.bitstring() == "110110001000");
  CHECK(c.hex() == "D88");
  CHECK(c.bit(1) == +1);
  CHECK(c.bit(3) == -1);
  CHECK(code_of("0101").hex() == "5");
  CHECK(code_of("010101001101").hex() == "54D");
  CHECK(code_of("1100").hamming(code_of("0011")) == 4);
}
