#pragma once

// Pitch/roll pose labels of the form P<pitch>_R<roll>, in degrees.

#include <algorithm>
#include <charconv>
#include <compare>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "microsim/error.hpp"

namespace microsim {

struct PoseLabel {
  int pitch = 0;
  int roll = 0;

  friend auto operator<=>(const PoseLabel&, const PoseLabel&) = default;
};

inline std::string to_string(const PoseLabel& p) {
  return "P" + std::to_string(p.pitch) + "_R" + std::to_string(p.roll);
}

/// Syntax and 10-degree resolution only; see parse_pose for class-set
/// membership.
inline PoseLabel parse_pose_syntax(std::string_view text) {
  auto fail = [&](const char* why) {
    return ParseError("pose label '" + std::string(text) + "': " + why);
  };
  auto read_int = [&](std::string_view s, int& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
  };
  if (text.size() < 5 || text.front() != 'P') throw fail("expected P<int>_R<int>");
  const auto sep = text.find("_R");
  if (sep == std::string_view::npos) throw fail("expected P<int>_R<int>");
  PoseLabel p;
  if (!read_int(text.substr(1, sep - 1), p.pitch) || !read_int(text.substr(sep + 2), p.roll))
    throw fail("expected P<int>_R<int>");
  if (p.pitch % 10 != 0 || p.roll % 10 != 0)
    throw fail("angles must be multiples of 10 degrees");
  return p;
}

/// The configured set of pose classes, kept sorted.
class PoseClassSet {
public:
  PoseClassSet() = default;
  explicit PoseClassSet(std::vector<PoseLabel> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end())
      throw InvalidArgument("pose class set contains duplicates");
  }

  bool contains(const PoseLabel& p) const {
    return std::binary_search(labels_.begin(), labels_.end(), p);
  }
  const std::vector<PoseLabel>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

private:
  std::vector<PoseLabel> labels_;
};

/// Placeholder 35-class grid: pitch 0..40 x roll 0..60 in 10-degree steps.
/// Consistent with every label the source data names, but the true
/// enumeration should come from a class-set file.
inline PoseClassSet default_class_set() {
  std::vector<PoseLabel> v;
  for (int pitch = 0; pitch <= 40; pitch += 10)
    for (int roll = 0; roll <= 60; roll += 10) v.push_back({pitch, roll});
  return PoseClassSet(std::move(v));
}

inline PoseLabel parse_pose(std::string_view text, const PoseClassSet& classes) {
  const auto p = parse_pose_syntax(text);
  if (!classes.contains(p))
    throw ParseError("pose label '" + std::string(text) + "' is not in the class set");
  return p;
}

/// One label per line; blank lines and `#` comments are ignored.
inline PoseClassSet parse_class_set(std::istream& in) {
  std::vector<PoseLabel> v;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (!line.empty()) v.push_back(parse_pose_syntax(line));
  }
  return PoseClassSet(std::move(v));
}

inline PoseClassSet load_class_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open class set '" + path + "'");
  return parse_class_set(in);
}

} // namespace microsim
