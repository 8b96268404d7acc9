#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plastisort/harness.hpp"

namespace plastisort {

/// Sectioned key=value text config ("[section]" headers, '#' comments).
/// Keys keep insertion order for round-tripping.
class KvConfig {
public:
  static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>");
  static KvConfig parse_file(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, const std::string& value);
  // dotted form "section.key=value" used by CLI overrides
  void set_dotted(const std::string& assignment);
  std::optional<std::string> get(const std::string& section, const std::string& key) const;

  std::string serialize() const;

  // every (section, key) present, for unknown-key rejection
  std::vector<std::pair<std::string, std::string>> keys() const;

private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> items;
  };
  std::vector<Section> sections_;
  Section& section(const std::string& name);
};

// Builds a TrainConfig from a config, rejecting unknown sections/keys.
TrainConfig train_config_from(const KvConfig& cfg);

// Full resolved snapshot of a TrainConfig (every field explicit), suitable
// for re-running the experiment.
KvConfig train_config_to_kv(const TrainConfig& cfg);

// Layer list grammar used by [network] layers=, e.g.
//   conv:8k3s1p1, relu, maxpool:k2s2, lrn, dropout:0.5, fc:16, softmax-xent
NetworkSpec parse_network_spec(const std::string& input, int classes,
                               const std::string& layers);

} // namespace plastisort
