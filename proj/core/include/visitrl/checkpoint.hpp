#pragma once

#include <map>
#include <string>
#include <vector>

#include "visitrl/nnet.hpp"

namespace visitrl {

/// Binary checkpoint container: a version header followed by named sections.
/// Network parameters are stored as raw doubles, so a save/load round trip is
/// bit-exact.
class Checkpoint {
 public:
  void add_mlp(const std::string& name, const Mlp& net);
  void add_text(const std::string& name, const std::string& text);
  void add_doubles(const std::string& name, const Eigen::VectorXd& values);

  bool has(const std::string& name) const { return sections_.count(name) != 0; }
  Mlp mlp(const std::string& name) const;
  std::string text(const std::string& name) const;
  Eigen::VectorXd doubles(const std::string& name) const;
  std::vector<std::string> section_names() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  const std::vector<char>& section(const std::string& name) const;
  std::map<std::string, std::vector<char>> sections_;
};

}  // namespace visitrl
