#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebip/priors.hpp"
#include "ebip/sim.hpp"

namespace ebip::cli {

/// Parses argv, runs one subcommand and returns the process exit code:
/// 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
int run(int argc, char** argv);

/// A corpus directory: manifest.json plus one file per demonstration.
struct CorpusDir {
  std::vector<Demonstration> demos;
  std::optional<ScenarioSpec> scenario;
};

void write_corpus_dir(const std::filesystem::path& dir, const ScenarioSpec& spec, int count,
                      std::uint64_t seed);
CorpusDir load_corpus_dir(const std::filesystem::path& dir);

/// Model file: basis model, per-demonstration weights and the noise diagonal.
nlohmann::json trained_to_json(const TrainedModel& trained);
TrainedModel trained_from_json(const nlohmann::json& j);

}  // namespace ebip::cli
