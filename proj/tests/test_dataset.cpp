#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "plastisort/dataset.hpp"
#include "plastisort/errors.hpp"
#include "plastisort/image.hpp"

using namespace plastisort;
namespace fs = std::filesystem;

namespace {

fs::path make_fake_dataset(const std::string& name, int per_class) {
  fs::path root = fs::temp_directory_path() / name;
  fs::remove_all(root);
  for (const char* cls : {"ABS", "PS"}) {
    fs::create_directories(root / cls);
    for (int i = 0; i < per_class; ++i) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "img_%04d.pgm", i);
      RasterImage px(1, 1, 1, static_cast<uint8_t>(i % 256));
      save_image(px, root / cls / fname);
    }
  }
  return root;
}

} // namespace

TEST_CASE("paper-shaped split: 215 per class -> 160/40/15") {
  fs::path root = make_fake_dataset("plastisort_split_215", 215);
  DatasetListing l = split_dataset(root, 0.2, 15, 1);
  CHECK(l.classes.size() == 2);
  CHECK(l.test.size() == 30);
  CHECK(l.val.size() == 80);
  CHECK(l.train.size() == 320);
  // per class
  for (int cls : {0, 1}) {
    auto count = [cls](const std::vector<DatasetListing::Entry>& v) {
      int n = 0;
      for (const auto& e : v)
        if (e.cls == cls) ++n;
      return n;
    };
    CHECK(count(l.test) == 15);
    CHECK(count(l.val) == 40);
    CHECK(count(l.train) == 160);
  }
}

TEST_CASE("no file lands in two roles") {
  fs::path root = make_fake_dataset("plastisort_split_roles", 40);
  DatasetListing l = split_dataset(root, 0.3, 5, 9);
  std::set<fs::path> seen;
  size_t total = 0;
  for (const auto* role : {&l.train, &l.val, &l.test}) {
    for (const auto& e : *role) {
      CHECK(seen.insert(e.path).second);
      ++total;
    }
  }
  CHECK(total == 80);
}

TEST_CASE("val 0 and test 0 put everything in train") {
  fs::path root = make_fake_dataset("plastisort_split_all", 12);
  DatasetListing l = split_dataset(root, 0.0, 0, 3);
  CHECK(l.train.size() == 24);
  CHECK(l.val.empty());
  CHECK(l.test.empty());
}

TEST_CASE("same seed gives an identical assignment, different seeds differ") {
  fs::path root = make_fake_dataset("plastisort_split_seed", 30);
  DatasetListing a = split_dataset(root, 0.2, 5, 77);
  DatasetListing b = split_dataset(root, 0.2, 5, 77);
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].path == b.train[i].path);
  for (size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].path == b.test[i].path);

  DatasetListing c = split_dataset(root, 0.2, 5, 78);
  bool any_diff = false;
  for (size_t i = 0; i < a.test.size(); ++i) any_diff |= a.test[i].path != c.test[i].path;
  CHECK(any_diff);
}

TEST_CASE("insufficient images is an error") {
  fs::path root = make_fake_dataset("plastisort_split_short", 10);
  CHECK_THROWS_AS(split_dataset(root, 0.2, 10, 0), ValidationError);
  CHECK_THROWS_AS(split_dataset(root, 0.2, 15, 0), ValidationError);
}

TEST_CASE("bad layouts are rejected") {
  fs::path root = fs::temp_directory_path() / "plastisort_split_bad";
  fs::remove_all(root);
  fs::create_directories(root / "only_one_class");
  save_image(RasterImage(1, 1, 1), root / "only_one_class" / "x.pgm");
  CHECK_THROWS_AS(split_dataset(root, 0.2, 0, 0), ValidationError);
  CHECK_THROWS_AS(split_dataset(root / "missing", 0.2, 0, 0), ValidationError);
}
