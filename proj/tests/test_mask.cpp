#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "normlens/mask.hpp"

using namespace normlens;

namespace {

struct TempFile {
  std::string path;
  TempFile(const std::string& name, const std::string& content) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("build_mask_table reads pairs, names and exclusions") {
  TempFile pairs("mask_pairs.csv", "mamma,pappa,mammapappa\npojke,flicka,pojkeflicka\n");
  TempFile family("mask_family.txt", "andersson\n");
  TempFile first("mask_first.txt", "Anna\nStar\n");
  TempFile excl("mask_excl.txt", "star\n");
  auto table = build_mask_table(pairs.path, family.path, first.path, excl.path);

  REQUIRE(table.lookup("mamma") != nullptr);
  CHECK(*table.lookup("mamma") == "mammapappa");
  CHECK(*table.lookup("pappa") == "mammapappa");
  CHECK(*table.lookup("anna") == "firstname");
  CHECK(*table.lookup("andersson") == "familyname");
  CHECK(table.lookup("star") == nullptr);  // excluded common word
  CHECK(table.lookup("annat") == nullptr);
}

TEST_CASE("build_mask_table rejects a token claimed by two groups") {
  TempFile pairs("mask_pairs2.csv", "anna,annan,annaannan\n");
  TempFile first("mask_first2.txt", "anna\n");
  CHECK_THROWS_WITH_AS(build_mask_table(pairs.path, "", first.path, ""),
                       doctest::Contains("anna"), std::runtime_error);
}

TEST_CASE("apply_mask replaces exactly the listed tokens") {
  TempFile pairs("mask_pairs3.csv", "pojke,flicka,pojkeflicka\n");
  auto table = build_mask_table(pairs.path, "", "", "");
  CHECK(apply_mask({"pojke"}, table) == std::vector<std::string>{"pojkeflicka"});
  // punctuation-attached forms do not match (exact whole-token matching)
  CHECK(apply_mask({"pojke?"}, table) == std::vector<std::string>{"pojke?"});
}

TEST_CASE("apply_mask is idempotent") {
  TempFile pairs("mask_pairs4.csv", "mamma,pappa,mammapappa\n");
  TempFile first("mask_first4.txt", "anna\n");
  auto table = build_mask_table(pairs.path, "", first.path, "");
  const std::vector<std::string> input{"mamma", "och", "anna", "gick"};
  auto once = apply_mask(input, table);
  CHECK(apply_mask(once, table) == once);
}

TEST_CASE("masking reduces distinct tokens by the collapsed forms found") {
  TempFile pairs("mask_pairs5.csv", "mamma,pappa,mammapappa\n");
  auto table = build_mask_table(pairs.path, "", "", "");
  const std::vector<std::string> corpus{"mamma", "pappa", "ute", "mamma"};
  std::set<std::string> before(corpus.begin(), corpus.end());
  auto masked = apply_mask(corpus, table);
  std::set<std::string> after(masked.begin(), masked.end());
  CHECK(before.size() == 3);
  CHECK(after.size() == 2);  // mamma+pappa collapsed into one form
}
