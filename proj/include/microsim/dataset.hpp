#pragma once

// Dataset manifests: labelled frames with their source and split, seeded
// stratified splitting, and pose hold-out sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "microsim/align.hpp"
#include "microsim/error.hpp"
#include "microsim/pose.hpp"
#include "microsim/random.hpp"

namespace microsim {

enum class Source { Experimental, Rendered, Generated };
enum class Split { Unassigned, Train, Val, Test };

inline std::string to_string(Source s) {
  switch (s) {
  case Source::Experimental: return "experimental";
  case Source::Rendered: return "rendered";
  case Source::Generated: return "generated";
  }
  return "?";
}

inline std::string to_string(Split s) {
  switch (s) {
  case Split::Unassigned: return "";
  case Split::Train: return "train";
  case Split::Val: return "val";
  case Split::Test: return "test";
  }
  return "?";
}

inline Source parse_source(const std::string& s) {
  if (s == "experimental") return Source::Experimental;
  if (s == "rendered") return Source::Rendered;
  if (s == "generated") return Source::Generated;
  throw ParseError("unknown source '" + s + "'");
}

inline Split parse_split(const std::string& s) {
  if (s.empty()) return Split::Unassigned;
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split '" + s + "'");
}

struct DatasetEntry {
  std::string image;
  std::optional<std::string> experimental; // paired target, when the entry is a pair
  PoseLabel pose;
  std::size_t bin = 0;
  double norm_depth = 0;
  Source source = Source::Experimental;
  Split split = Split::Unassigned;

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;

  void validate() const {
    if (train < 0 || val < 0 || test < 0)
      throw InvalidArgument("split fractions must be >= 0");
    if (std::abs(train + val + test - 1.0) > 1e-9)
      throw InvalidArgument("split fractions must sum to 1");
  }
  friend bool operator==(const SplitFractions&, const SplitFractions&) = default;
};

struct DatasetManifest {
  std::vector<DatasetEntry> entries;
  SplitFractions fractions;
  std::uint64_t seed = 42;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count_if(
        entries.begin(), entries.end(), [s](const DatasetEntry& e) { return e.split == s; }));
  }
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Rendered/experimental pairs become entries whose image is the rendered
/// frame and whose target is the experimental one.
inline DatasetManifest from_pair_manifest(const PairManifest& pm) {
  DatasetManifest m;
  m.seed = pm.seed;
  for (const auto& p : pm.pairs) {
    DatasetEntry e;
    e.image = p.rendered;
    e.experimental = p.experimental;
    e.pose = parse_pose_syntax(p.pose);
    e.bin = p.bin;
    e.norm_depth = p.norm_depth;
    e.source = Source::Rendered;
    m.entries.push_back(std::move(e));
  }
  return m;
}

/// Largest-remainder apportionment of n items to the three fractions.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> frac{f.train, f.val, f.test};
  std::array<std::size_t, 3> size{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = frac[i] * static_cast<double>(n);
    size[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - std::floor(exact);
    assigned += size[i];
  }
  while (assigned > n) { // guards against round-up in frac * n
    for (int i = 2; i >= 0 && assigned > n; --i)
      if (size[i] > 0) { --size[i]; --assigned; }
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++size[best];
    rem[best] = -1;
    ++assigned;
  }
  return size;
}

/// Seeded shuffle within each pose, round-robin interleave of the poses (in
/// label order), then contiguous train / val / test blocks. Every pose lands
/// in train whenever the train block has room for one entry per pose.
inline DatasetManifest split_manifest(DatasetManifest m, const SplitFractions& fractions,
                                      std::uint64_t seed) {
  fractions.validate();
  {
    std::set<std::string> seen;
    for (const auto& e : m.entries)
      if (!seen.insert(e.image).second)
        throw InvalidArgument("split_manifest: duplicate image path '" + e.image + "'");
  }
  std::map<PoseLabel, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < m.entries.size(); ++i) strata[m.entries[i].pose].push_back(i);

  Rng rng(seed);
  for (auto& [pose, idx] : strata) seeded_shuffle(std::span<std::size_t>(idx), rng);

  std::vector<std::size_t> order;
  order.reserve(m.entries.size());
  for (std::size_t round = 0; order.size() < m.entries.size(); ++round)
    for (const auto& [pose, idx] : strata)
      if (round < idx.size()) order.push_back(idx[round]);

  const auto sizes = split_sizes(order.size(), fractions);
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& e = m.entries[order[k]];
    e.split = k < sizes[0] ? Split::Train : k < sizes[0] + sizes[1] ? Split::Val : Split::Test;
  }
  m.fractions = fractions;
  m.seed = seed;
  return m;
}

struct PoseSplitSpec {
  std::vector<PoseLabel> set_a;
  std::vector<PoseLabel> set_b;
};

/// Held-out set A and its complement B within the class set.
inline PoseSplitSpec make_pose_split(const PoseClassSet& full, std::vector<PoseLabel> set_a) {
  std::sort(set_a.begin(), set_a.end());
  set_a.erase(std::unique(set_a.begin(), set_a.end()), set_a.end());
  for (const auto& p : set_a)
    if (!full.contains(p))
      throw InvalidArgument("make_pose_split: pose " + to_string(p) + " is not in the class set");
  PoseSplitSpec s;
  s.set_a = set_a;
  for (const auto& p : full.labels())
    if (!std::binary_search(set_a.begin(), set_a.end(), p)) s.set_b.push_back(p);
  return s;
}

/// The five poses held out in the generalisation experiment.
inline std::vector<PoseLabel> default_holdout_poses() {
  return {{0, 20}, {10, 30}, {20, 40}, {30, 50}, {40, 60}};
}

inline std::string to_jsonl(const DatasetManifest& m) {
  using ojson = nlohmann::ordered_json;
  std::string out;
  ojson header;
  header["seed"] = m.seed;
  header["fractions"] = {m.fractions.train, m.fractions.val, m.fractions.test};
  header["entries"] = m.entries.size();
  out += header.dump() + "\n";
  for (const auto& e : m.entries) {
    ojson j;
    j["image"] = e.image;
    if (e.experimental) j["experimental"] = *e.experimental;
    j["bin"] = e.bin;
    j["pose"] = to_string(e.pose);
    j["norm_depth"] = e.norm_depth;
    j["source"] = to_string(e.source);
    j["split"] = to_string(e.split);
    out += j.dump() + "\n";
  }
  return out;
}

inline DatasetManifest parse_dataset_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (header) {
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto f = j.at("fractions");
        m.fractions = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
        header = false;
        continue;
      }
      DatasetEntry e;
      e.image = j.at("image").get<std::string>();
      if (j.contains("experimental")) e.experimental = j.at("experimental").get<std::string>();
      e.bin = j.value("bin", std::size_t{0});
      e.pose = parse_pose_syntax(j.at("pose").get<std::string>());
      e.norm_depth = j.value("norm_depth", 0.0);
      e.source = parse_source(j.at("source").get<std::string>());
      e.split = parse_split(j.value("split", std::string{}));
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("dataset manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (header) throw ParseError("dataset manifest: missing header line");
  return m;
}

inline DatasetManifest parse_dataset_manifest(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset_manifest(in);
}

} // namespace microsim
