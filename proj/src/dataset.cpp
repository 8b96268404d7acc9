#include "plastisort/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "plastisort/errors.hpp"
#include "plastisort/rng.hpp"

namespace plastisort {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm" || ext == ".ppm" || ext == ".png";
}

} // namespace

DatasetListing split_dataset(const fs::path& root, double val_fraction, int test_per_class,
                             uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw ValidationError("split_dataset: val_fraction must be in [0,1)");
  if (test_per_class < 0) throw ValidationError("split_dataset: test_per_class must be >= 0");
  if (!fs::is_directory(root))
    throw ValidationError("split_dataset: not a directory: " + root.string());

  DatasetListing listing;
  listing.root = root;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) listing.classes.push_back(entry.path().filename().string());
  std::sort(listing.classes.begin(), listing.classes.end());
  if (listing.classes.size() < 2)
    throw ValidationError("split_dataset: need at least 2 class subdirectories under " +
                          root.string());

  for (size_t ci = 0; ci < listing.classes.size(); ++ci) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / listing.classes[ci]))
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    if (files.empty())
      throw ValidationError("split_dataset: class directory " + listing.classes[ci] +
                            " holds no loadable images");
    std::sort(files.begin(), files.end());
    if (static_cast<int>(files.size()) <= test_per_class)
      throw ValidationError("split_dataset: class " + listing.classes[ci] + " has only " +
                            std::to_string(files.size()) + " images, need more than " +
                            std::to_string(test_per_class));

    std::vector<int> order = identity_permutation(static_cast<int>(files.size()));
    Pcg32 rng(mix_seed(seed, rng_stream::kSplit), ci);
    shuffle(order, rng);

    const int n = static_cast<int>(files.size());
    const int n_test = test_per_class;
    const int remaining = n - n_test;
    const int n_val = static_cast<int>(std::lround(val_fraction * remaining));
    const int cls = static_cast<int>(ci);
    for (int i = 0; i < n; ++i) {
      const fs::path& p = files[static_cast<size_t>(order[static_cast<size_t>(i)])];
      if (i < n_test)
        listing.test.push_back({p, cls});
      else if (i < n_test + n_val)
        listing.val.push_back({p, cls});
      else
        listing.train.push_back({p, cls});
    }
  }
  return listing;
}

} // namespace plastisort
