#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "expath/kg.hpp"

namespace expath {

struct PlantedRule {
  std::string head;               // relation label, e.g. "r0"
  std::vector<std::string> body;  // labels, trailing ' marks an inverse step
  double probability = 1.0;       // in (0, 1]
};

// Relations are labelled r0..r{n-1}, entities e0000.. . Each planted rule
// gets disjoint trees: `fan_in` sources share one intermediate, `branching`
// intermediates share the node above, the root is the terminal. Relations
// not used by any rule carry random background facts.
struct SyntheticSpec {
  std::uint32_t entities = 1000;
  std::uint32_t relations = 6;
  std::vector<PlantedRule> rules{{"r0", {"r1", "r2"}, 0.9}};
  double density = 1.0;     // background facts per entity
  std::uint32_t fan_in = 10;
  std::uint32_t branching = 1;
  double coverage = 0.9;    // share of entities placed in planted trees
  double holdout = 0.05;    // share of head facts sent to test
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
  std::uint64_t seed = 42;

  void validate() const;  // throws InvalidArgument
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct SyntheticData {
  std::vector<Triple> train, valid, test;  // each sorted
  std::size_t body_pairs = 0;              // over all planted rules
  std::size_t head_facts = 0;
};

// Throws Error when the spec cannot produce a single head fact.
SyntheticData generate(const SyntheticSpec& spec);

// Writes train.txt, valid.txt, test.txt and synth.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const SyntheticSpec& spec,
                   const SyntheticData& data);

}  // namespace expath
