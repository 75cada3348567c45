#include <gtest/gtest.h>

#include "shapnarr/pyliteral.hpp"

using namespace shapnarr;

TEST(PyLiteral, PythonSyntax) {
  PyLiteralParser p(R"({'a': 1, "b": -2.5, 'c': None, 'd': True, 'e': (1, 2,), f: 'x',})");
  const auto v = p.parse();
  EXPECT_EQ(v["a"], 1);
  EXPECT_EQ(v["b"], -2.5);
  EXPECT_TRUE(v["c"].is_null());
  EXPECT_EQ(v["d"], true);
  EXPECT_EQ(v["e"].size(), 2u);
  EXPECT_EQ(v["f"], "x");
}

TEST(PyLiteral, ApostropheInsideSingleQuotes) {
  PyLiteralParser p(R"({'assumption': 'The student's record is strong.', 'k': 'it's'})");
  const auto v = p.parse();
  EXPECT_EQ(v["assumption"], "The student's record is strong.");
  EXPECT_EQ(v["k"], "it's");
}

TEST(PyLiteral, EscapesAndTripleQuotes) {
  PyLiteralParser p(R"({'a': 'it\'s', 'b': """multi
line""", 'c': "é"})");
  const auto v = p.parse();
  EXPECT_EQ(v["a"], "it's");
  EXPECT_EQ(v["b"], "multi\nline");
  EXPECT_EQ(v["c"], "\xC3\xA9");
}

TEST(PyLiteral, DuplicatesFirstWins) {
  PyLiteralParser p("{'a': 1, 'a': 2}");
  const auto v = p.parse();
  EXPECT_EQ(v["a"], 1);
  ASSERT_EQ(p.duplicate_keys().size(), 1u);
}

TEST(PyLiteral, KeyOrderPreserved) {
  PyLiteralParser p("{'z': 1, 'a': 2, 'm': 3}");
  const auto v = p.parse();
  std::vector<std::string> keys;
  for (const auto& [k, _] : v.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"z", "a", "m"}));
}

TEST(PyLiteral, Errors) {
  EXPECT_THROW(PyLiteralParser("{'a': 1").parse(), Error);
  EXPECT_THROW(PyLiteralParser("{'a' 1}").parse(), Error);
  EXPECT_THROW(PyLiteralParser("{'a': 1} trailing").parse(), Error);
  EXPECT_THROW(PyLiteralParser("{'a': 1.2.3}").parse(), Error);
}

TEST(MappingCandidates, FencesThenBraces) {
  const auto c = mapping_candidates("Sure!\n```python\n{'a': 1}\n```\nAlso {'b': {'c': 2}} done");
  ASSERT_GE(c.size(), 3u);
  EXPECT_EQ(c[0], "{'a': 1}");
  EXPECT_EQ(c[2], "{'b': {'c': 2}}");
  EXPECT_TRUE(mapping_candidates("no braces here").empty());
}
