#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "vdlab/tokenizer.hpp"

using namespace vdlab;

TEST_CASE("encode maps bytes to their values") {
    CHECK(encode("ab") == std::vector<int>{97, 98});
    CHECK(encode("").empty());
}

TEST_CASE("decode inverts encode") {
    CHECK(decode({97, 98}) == "ab");
    CHECK(decode({}).empty());
}

TEST_CASE("round trip on random byte strings") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 200);
    for (int trial = 0; trial < 50; ++trial) {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(byte(rng)));
        const auto ids = encode(s);
        CHECK(ids.size() == s.size());
        for (int id : ids) CHECK(id < 256);
        CHECK(decode(ids) == s);
        CHECK(encode(decode(ids)) == ids);
    }
}

TEST_CASE("specials never collide with byte ids") {
    CHECK(vocab::kPad == 256);
    CHECK(vocab::kEos == 257);
    CHECK(vocab::kYes == 258);
    CHECK(vocab::kNo == 259);
    CHECK(vocab::kSize == 260);
}

TEST_CASE("decode rejects specials, render shows them") {
    CHECK_THROWS_AS(decode({vocab::kEos}), std::invalid_argument);
    CHECK(render({97, vocab::kYes, vocab::kEos, vocab::kPad}) == "a<YES><EOS><PAD>");
}
