#pragma once

// Text checkpoint, one token group per line:
//
//   depo-checkpoint 1
//   meta <key> <value...>                 (zero or more)
//   net <name> <n_slices> <n_values>      (one block per network)
//   slice <name> <rows> <cols>            (n_slices lines, in layout order)
//   <value>                               (n_values lines, hex float)
//   end
//
// Hex floats make the round trip exact.

#include "depo/approx/params.hpp"
#include "depo/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace depo::approx {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, ParamVector> nets;

  const ParamVector& net(const std::string& name) const {
    auto it = nets.find(name);
    if (it == nets.end()) throw FormatError("checkpoint has no network named '" + name + "'");
    return it->second;
  }
};

namespace detail {
inline void check_token(const std::string& token, const char* what) {
  if (token.empty() || token.find_first_of(" \t\n\r") != std::string::npos)
    throw FormatError(std::string(what) + " must be a non-empty token without whitespace: '" + token + "'");
}

inline double parse_double(const std::string& text, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    throw FormatError("line " + std::to_string(line) + ": malformed number '" + text + "'");
  return v;
}
}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out << "depo-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ck.meta) {
    detail::check_token(k, "meta key");
    if (v.find('\n') != std::string::npos) throw FormatError("meta value for '" + k + "' contains a newline");
    out << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& [name, params] : ck.nets) {
    detail::check_token(name, "network name");
    const auto& slices = params.layout().slices();
    out << "net " << name << ' ' << slices.size() << ' ' << params.size() << '\n';
    for (const auto& s : slices) {
      detail::check_token(s.name, "slice name");
      out << "slice " << s.name << ' ' << s.rows << ' ' << s.cols << '\n';
    }
    out << std::hexfloat;
    for (Eigen::Index i = 0; i < params.size(); ++i) out << params.values()(i) << '\n';
    out << std::defaultfloat;
  }
  out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ck;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw FormatError("checkpoint truncated after line " + std::to_string(line_no));
    ++line_no;
    return line;
  };

  {
    std::istringstream head(next_line());
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != "depo-checkpoint") throw FormatError("not a checkpoint file (bad magic)");
    if (version != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }

  while (true) {
    const std::string current = next_line();
    std::istringstream ls(current);
    std::string tag;
    ls >> tag;
    if (tag == "end") break;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (tag == "net") {
      std::string name;
      long n_slices = -1;
      long n_values = -1;
      ls >> name >> n_slices >> n_values;
      if (!ls || n_slices < 0 || n_values < 0)
        throw FormatError("line " + std::to_string(line_no) + ": malformed net header");
      ParamLayout layout;
      for (long i = 0; i < n_slices; ++i) {
        std::istringstream ss(next_line());
        std::string stag, sname;
        long rows = 0, cols = 0;
        ss >> stag >> sname >> rows >> cols;
        if (stag != "slice" || !ss) throw FormatError("line " + std::to_string(line_no) + ": malformed slice line");
        layout.add(sname, rows, cols);
      }
      if (layout.size() != n_values)
        throw FormatError("net '" + name + "': slices cover " + std::to_string(layout.size()) + " values, header says " +
                          std::to_string(n_values));
      Vector values(n_values);
      for (long i = 0; i < n_values; ++i) values(i) = detail::parse_double(next_line(), line_no);
      if (ck.nets.count(name)) throw FormatError("duplicate network '" + name + "'");
      ck.nets.emplace(name, ParamVector(std::move(layout), std::move(values)));
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": unknown record '" + tag + "'");
    }
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace depo::approx
