#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace plastisort {

enum class Role { Train, Val, Test };

/// Per-class file lists with train/val/test roles. Class names come from
/// the immediate subdirectories of the dataset root; listing order is
/// lexicographic so splits are reproducible byte-for-byte.
struct DatasetListing {
  std::filesystem::path root;
  std::vector<std::string> classes;
  struct Entry {
    std::filesystem::path path;
    int cls = 0;
  };
  std::vector<Entry> train, val, test;

  const std::vector<Entry>& role(Role r) const {
    switch (r) {
      case Role::Train: return train;
      case Role::Val: return val;
      default: return test;
    }
  }
};

// Per class: draw test_per_class files first (seeded), then val_fraction of
// the remainder to validation, the rest to train. Deterministic for a given
// seed.
DatasetListing split_dataset(const std::filesystem::path& root, double val_fraction,
                             int test_per_class, uint64_t seed);

} // namespace plastisort
