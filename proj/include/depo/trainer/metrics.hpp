#pragma once

#include "depo/errors.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace depo::trainer {

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

/// One evaluation point. Loss columns average the gradient steps since the previous row;
/// NaN marks a quantity the variant does not have.
struct MetricsRow {
  int epoch = 0;
  long env_steps = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double planner_mse = kNotApplicable;
  double disc_loss = kNotApplicable;
  double q_loss = kNotApplicable;
  double inverse_loss = kNotApplicable;
  double supervised_loss = kNotApplicable;
  double cdepg_loss = kNotApplicable;
  double policy_loss = kNotApplicable;
  long disc_updates = 0;
  long planner_updates = 0;
  long q_updates = 0;
  long inverse_updates = 0;
};

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"epoch",         "env_steps",       "mean_return", "success_rate", "planner_mse",
                                             "disc_loss",     "q_loss",          "inverse_loss", "supervised_loss", "cdepg_loss",
                                             "policy_loss",   "disc_updates",    "planner_updates", "q_updates", "inverse_updates"};
  return cols;
}

struct MetricsLog {
  std::string agent;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<MetricsRow> rows;

  bool empty() const { return rows.empty(); }
  const MetricsRow& last() const {
    if (rows.empty()) throw PreconditionError("metrics log is empty");
    return rows.back();
  }

  /// Env steps at the first row whose success rate reaches `threshold`; -1 if never.
  long steps_to_success(double threshold) const {
    for (const auto& r : rows)
      if (r.success_rate >= threshold) return r.env_steps;
    return -1;
  }
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Comma-separated table: two comment lines of run metadata, a header, then one row per eval point.
inline void write_metrics(std::ostream& out, const MetricsLog& log) {
  out << "# agent=" << log.agent << " seed=" << log.seed << "\n";
  out << "# config_hash=" << log.config_hash << "\n";
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : log.rows) {
    out << r.epoch << ',' << r.env_steps << ',' << format_double(r.mean_return) << ',' << format_double(r.success_rate) << ','
        << format_double(r.planner_mse) << ',' << format_double(r.disc_loss) << ',' << format_double(r.q_loss) << ','
        << format_double(r.inverse_loss) << ',' << format_double(r.supervised_loss) << ',' << format_double(r.cdepg_loss) << ','
        << format_double(r.policy_loss) << ',' << r.disc_updates << ',' << r.planner_updates << ',' << r.q_updates << ','
        << r.inverse_updates << "\n";
  }
}

inline void save_metrics(const std::string& path, const MetricsLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_metrics(out, log);
}

inline MetricsLog read_metrics(std::istream& in) {
  MetricsLog log;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "agent") log.agent = v;
        else if (k == "seed") log.seed = std::stoull(v);
        else if (k == "config_hash") log.config_hash = v;
      }
      continue;
    }
    if (!header) {
      std::string expected;
      const auto& cols = metrics_columns();
      for (std::size_t i = 0; i < cols.size(); ++i) expected += (i ? "," : "") + cols[i];
      if (line != expected) throw FormatError("metrics header does not match the column layout");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != metrics_columns().size()) throw FormatError("metrics row has " + std::to_string(f.size()) + " fields");
    auto d = [](const std::string& s) { return s == "nan" ? kNotApplicable : std::stod(s); };
    try {
      MetricsRow r;
      r.epoch = std::stoi(f[0]);
      r.env_steps = std::stol(f[1]);
      r.mean_return = d(f[2]);
      r.success_rate = d(f[3]);
      r.planner_mse = d(f[4]);
      r.disc_loss = d(f[5]);
      r.q_loss = d(f[6]);
      r.inverse_loss = d(f[7]);
      r.supervised_loss = d(f[8]);
      r.cdepg_loss = d(f[9]);
      r.policy_loss = d(f[10]);
      r.disc_updates = std::stol(f[11]);
      r.planner_updates = std::stol(f[12]);
      r.q_updates = std::stol(f[13]);
      r.inverse_updates = std::stol(f[14]);
      log.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("malformed metrics row: " + line);
    }
  }
  if (!header) throw FormatError("metrics file has no header");
  return log;
}

inline MetricsLog load_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_metrics(in);
}

/// Git blob id of `bytes`: SHA-1 over "blob <size>\0" followed by the content.
inline std::string content_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 || EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericalError("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace depo::trainer
