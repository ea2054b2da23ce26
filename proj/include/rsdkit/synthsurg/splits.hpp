#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdkit/synthsurg/dataset.hpp"

namespace rsdkit::synthsurg {

/// T1 trains the encoder, T1+T2 the sequence model, V validates both and E
/// evaluates.
struct DatasetSplit {
  std::vector<std::string> t1_ids, t2_ids, v_ids, e_ids;
  int fold_index = 0;

  std::vector<std::string> train_ids() const;  // T1 then T2
  nlohmann::json to_json() const;
  static DatasetSplit from_json(const nlohmann::json& j);
};

struct SplitRatios {
  double t1 = 1.0 / 3.0;
  double t2 = 1.0 / 3.0;
  double v = 1.0 / 12.0;
  double e = 0.25;

  void validate() const;
  /// Parses "a,b,c,d" where each entry is a decimal or a fraction like 1/12.
  static SplitRatios parse(const std::string& text);
  std::string to_string() const;
};

/// Largest-remainder apportionment of n items over the given weights.
std::vector<int> apportion(int n, const std::vector<double>& weights);

/// Relative tolerance on Q1/Q3 of every subset against the full dataset.
inline constexpr double kQuartileTolerance = 0.15;

/// Duration-stratified splits. Surgeries are ranked by duration inside
/// duration terciles and dealt to subsets so every subset spans the whole
/// duration range. With n_folds > 1 the dataset is first dealt into n_folds
/// parts and fold k evaluates on part k, so the E sets partition the dataset
/// when n_folds * e = 1. Throws SplitError when a subset would be empty or the
/// quartile tolerance cannot be met.
std::vector<DatasetSplit> make_splits(const Dataset& dataset, const SplitRatios& ratios, int n_folds,
                                      std::uint64_t seed);

/// Re-deals T1 u T2 of `split` so that |T1| = t1_size (stratified the same way).
DatasetSplit with_cnn_train_size(const Dataset& dataset, const DatasetSplit& split, int t1_size, std::uint64_t seed);

/// True when Q1 and Q3 of `ids` are within kQuartileTolerance of the dataset's.
bool quartiles_similar(const Dataset& dataset, const std::vector<std::string>& ids);

void write_splits(const std::filesystem::path& path, const std::vector<DatasetSplit>& splits,
                  const nlohmann::json& extra = nlohmann::json::object());
std::vector<DatasetSplit> read_splits(const std::filesystem::path& path);
/// Accepts "fold0", "0", ...
int parse_fold(const std::string& text);

}  // namespace rsdkit::synthsurg
