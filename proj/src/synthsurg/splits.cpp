#include "rsdkit/synthsurg/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rsdkit/common/container.hpp"
#include "rsdkit/common/error.hpp"
#include "rsdkit/common/hash.hpp"
#include "rsdkit/common/stats.hpp"

namespace rsdkit::synthsurg {

namespace {

constexpr int kAttempts = 64;

double parse_ratio(const std::string& tok) {
  try {
    if (auto slash = tok.find('/'); slash != std::string::npos) {
      const double num = std::stod(tok.substr(0, slash));
      const double den = std::stod(tok.substr(slash + 1));
      if (den == 0.0) throw ConfigError("ratio with zero denominator: " + tok);
      return num / den;
    }
    return std::stod(tok);
  } catch (const std::invalid_argument&) {
    throw ConfigError("cannot parse ratio '" + tok + "'");
  }
}

// Surgery indices ordered by duration, with near-equal durations shuffled:
// ranks are cut into terciles and every window of `window` consecutive ranks
// within a tercile is permuted.
std::vector<std::size_t> stratified_order(const Dataset& ds, const std::vector<std::size_t>& members,
                                          std::size_t window, std::mt19937_64& rng) {
  std::vector<std::size_t> order = members;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.surgeries[a].record.total_duration_T < ds.surgeries[b].record.total_duration_T;
  });
  const std::size_t n = order.size();
  for (int tercile = 0; tercile < 3; ++tercile) {
    const std::size_t lo = n * static_cast<std::size_t>(tercile) / 3;
    const std::size_t hi = n * static_cast<std::size_t>(tercile + 1) / 3;
    for (std::size_t w = lo; w < hi; w += window)
      std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(w),
                   order.begin() + static_cast<std::ptrdiff_t>(std::min(hi, w + window)), rng);
  }
  return order;
}

// Walks `order` assigning each item to the subset whose quota is furthest
// behind its proportional share at that point.
std::vector<std::vector<std::size_t>> deal(const std::vector<std::size_t>& order, const std::vector<int>& counts) {
  std::vector<std::vector<std::size_t>> out(counts.size());
  const double n = static_cast<double>(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::size_t best = counts.size();
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (static_cast<int>(out[s].size()) >= counts[s]) continue;
      const double deficit = counts[s] * (static_cast<double>(i) + 1.0) / n - static_cast<double>(out[s].size());
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    out[best].push_back(order[i]);
  }
  return out;
}

std::vector<std::string> to_ids(const Dataset& ds, std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(ds.surgeries[i].record.surgery_id);
  return out;
}

std::vector<std::size_t> to_indices(const Dataset& ds, const std::vector<std::string>& ids) {
  std::vector<std::size_t> out;
  for (const auto& id : ids) out.push_back(ds.index_of(id));
  return out;
}

bool all_similar(const Dataset& ds, const DatasetSplit& s) {
  for (const auto* ids : {&s.t1_ids, &s.t2_ids, &s.v_ids, &s.e_ids})
    if (!ids->empty() && !quartiles_similar(ds, *ids)) return false;
  return true;
}

}  // namespace

std::vector<std::string> DatasetSplit::train_ids() const {
  std::vector<std::string> out = t1_ids;
  out.insert(out.end(), t2_ids.begin(), t2_ids.end());
  return out;
}

nlohmann::json DatasetSplit::to_json() const {
  return {{"fold_index", fold_index}, {"t1", t1_ids}, {"t2", t2_ids}, {"v", v_ids}, {"e", e_ids}};
}

DatasetSplit DatasetSplit::from_json(const nlohmann::json& j) {
  DatasetSplit s;
  s.fold_index = j.at("fold_index").get<int>();
  s.t1_ids = j.at("t1").get<std::vector<std::string>>();
  s.t2_ids = j.at("t2").get<std::vector<std::string>>();
  s.v_ids = j.at("v").get<std::vector<std::string>>();
  s.e_ids = j.at("e").get<std::vector<std::string>>();
  return s;
}

void SplitRatios::validate() const {
  for (double r : {t1, t2, v, e})
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
  if (!(t1 > 0.0 && e > 0.0)) throw ConfigError("split ratios: T1 and E must be non-empty");
  if (std::abs(t1 + t2 + v + e - 1.0) > 1e-6) throw ConfigError("split ratios must sum to 1");
}

SplitRatios SplitRatios::parse(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(parse_ratio(tok));
  if (vals.size() != 4) throw ConfigError("split ratios need four entries (t1,t2,v,e): " + text);
  SplitRatios r{vals[0], vals[1], vals[2], vals[3]};
  r.validate();
  return r;
}

std::string SplitRatios::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << t1 << "," << t2 << "," << v << "," << e;
  return os.str();
}

std::vector<int> apportion(int n, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // Round near-integers first so 120 * (1/3) lands on 40, not 39.
    const double exact = n * weights[i] / total;
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    counts[i] = static_cast<int>(std::floor(snapped));
    assigned += counts[i];
    rem.push_back({snapped - counts[i], i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) counts[rem[k % rem.size()].second] += 1;
  return counts;
}

bool quartiles_similar(const Dataset& dataset, const std::vector<std::string>& ids) {
  std::vector<double> all, sub;
  for (const auto& s : dataset.surgeries) all.push_back(s.record.total_duration_T);
  for (const auto& id : ids) sub.push_back(dataset.at(id).record.total_duration_T);
  if (sub.empty()) return false;
  const double q1 = stats::quantile(all, 0.25), q3 = stats::quantile(all, 0.75);
  const double s1 = stats::quantile(sub, 0.25), s3 = stats::quantile(sub, 0.75);
  return std::abs(s1 - q1) <= kQuartileTolerance * q1 && std::abs(s3 - q3) <= kQuartileTolerance * q3;
}

std::vector<DatasetSplit> make_splits(const Dataset& dataset, const SplitRatios& ratios, int n_folds,
                                      std::uint64_t seed) {
  ratios.validate();
  if (n_folds < 1) throw ConfigError("n_folds >= 1 violated");
  const int n = static_cast<int>(dataset.surgeries.size());
  if (n_folds > 1 && n_folds * ratios.e > 1.0 + 1e-9)
    throw ConfigError("n_folds * e-ratio exceeds 1: evaluation sets would overlap");
  const auto counts = apportion(n, {ratios.t1, ratios.t2, ratios.v, ratios.e});
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double r = k == 0 ? ratios.t1 : k == 1 ? ratios.t2 : k == 2 ? ratios.v : ratios.e;
    if (r > 0.0 && counts[k] == 0)
      throw SplitError("too few surgeries (" + std::to_string(n) + ") for a non-empty subset " + std::to_string(k));
  }
  std::vector<std::size_t> everyone(static_cast<std::size_t>(n));
  std::iota(everyone.begin(), everyone.end(), 0);

  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<std::vector<std::size_t>> parts;
    if (n_folds > 1) {
      parts = deal(stratified_order(dataset, everyone, static_cast<std::size_t>(n_folds), rng),
                   apportion(n, std::vector<double>(static_cast<std::size_t>(n_folds), 1.0)));
    }
    std::vector<DatasetSplit> out;
    bool ok = true;
    for (int fold = 0; fold < n_folds && ok; ++fold) {
      std::vector<std::size_t> e_set, rest;
      if (n_folds == 1) {
        rest = everyone;
      } else {
        const auto& part = parts[static_cast<std::size_t>(fold)];
        // Take |E| members of the part spread over its duration range.
        const auto take = deal(stratified_order(dataset, part, 2, rng),
                               {counts[3], static_cast<int>(part.size()) - counts[3]});
        e_set = take[0];
        for (std::size_t i : everyone)
          if (std::find(e_set.begin(), e_set.end(), i) == e_set.end()) rest.push_back(i);
      }
      std::vector<int> sub = {counts[0], counts[1], counts[2]};
      if (n_folds == 1) sub.push_back(counts[3]);
      const auto dealt = deal(stratified_order(dataset, rest, sub.size() + 1, rng), sub);
      DatasetSplit s;
      s.fold_index = fold;
      s.t1_ids = to_ids(dataset, dealt[0]);
      s.t2_ids = to_ids(dataset, dealt[1]);
      s.v_ids = to_ids(dataset, dealt[2]);
      s.e_ids = to_ids(dataset, n_folds == 1 ? dealt[3] : e_set);
      ok = all_similar(dataset, s);
      out.push_back(std::move(s));
    }
    if (ok) return out;
  }
  throw SplitError("could not meet the quartile similarity tolerance with " + std::to_string(n) +
                   " surgeries; use more surgeries or fewer folds");
}

DatasetSplit with_cnn_train_size(const Dataset& dataset, const DatasetSplit& split, int t1_size,
                                 std::uint64_t seed) {
  const auto pool = to_indices(dataset, split.train_ids());
  if (t1_size < 1 || t1_size >= static_cast<int>(pool.size()))
    throw ConfigError("cnn train size must be in [1, |T1 u T2|)");
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    const auto dealt =
        deal(stratified_order(dataset, pool, 3, rng), {t1_size, static_cast<int>(pool.size()) - t1_size});
    DatasetSplit s = split;
    s.t1_ids = to_ids(dataset, dealt[0]);
    s.t2_ids = to_ids(dataset, dealt[1]);
    if (quartiles_similar(dataset, s.t1_ids) && quartiles_similar(dataset, s.t2_ids)) return s;
  }
  throw SplitError("could not stratify T1 of size " + std::to_string(t1_size));
}

void write_splits(const std::filesystem::path& path, const std::vector<DatasetSplit>& splits,
                  const nlohmann::json& extra) {
  Json j = extra;
  j["folds"] = Json::array();
  for (const auto& s : splits) j["folds"].push_back(s.to_json());
  write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<DatasetSplit> read_splits(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw PipelineOrderError("no split file at " + path.string() + "; run `split` first");
  const Json j = Json::parse(read_file(path));
  std::vector<DatasetSplit> out;
  for (const auto& f : j.at("folds")) out.push_back(DatasetSplit::from_json(f));
  return out;
}

int parse_fold(const std::string& text) {
  std::string digits = text.rfind("fold", 0) == 0 ? text.substr(4) : text;
  try {
    std::size_t used = 0;
    const int k = std::stoi(digits, &used);
    if (used != digits.size() || k < 0) throw std::invalid_argument(text);
    return k;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse fold '" + text + "' (expected foldK or K)");
  }
}

}  // namespace rsdkit::synthsurg
