#pragma once

// MDP documents are JSON objects:
//   {
//     "n_states": S, "n_actions": A,
//     "transition": [S*A*S numbers, row-major in index order [s][a][s']],
//     "initial": [S numbers],
//     "discount": gamma,
//     "reward": [S*S numbers, row-major [s][s']]      (optional)
//   }

#include "depo/errors.hpp"
#include "depo/mdp/finite_mdp.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

namespace depo::mdp {

inline nlohmann::json to_json(const FiniteMDP& mdp) {
  nlohmann::json doc;
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  doc["n_states"] = mdp.n_states();
  doc["n_actions"] = mdp.n_actions();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(S * A * S));
  for (Eigen::Index r = 0; r < S * A; ++r)
    for (Eigen::Index c = 0; c < S; ++c) flat.push_back(mdp.transition()(r, c));
  doc["transition"] = flat;
  doc["initial"] = std::vector<double>(mdp.initial().data(), mdp.initial().data() + S);
  doc["discount"] = mdp.discount();
  if (mdp.reward()) {
    std::vector<double> rf;
    for (Eigen::Index r = 0; r < S; ++r)
      for (Eigen::Index c = 0; c < S; ++c) rf.push_back((*mdp.reward())(r, c));
    doc["reward"] = rf;
  }
  return doc;
}

inline FiniteMDP mdp_from_json(const nlohmann::json& doc) {
  static const char* known[] = {"n_states", "n_actions", "transition", "initial", "discount", "reward"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known))
      throw FormatError("unknown MDP field '" + it.key() + "'");
  }
  for (const char* key : {"n_states", "n_actions", "transition", "initial", "discount"})
    if (!doc.contains(key)) throw FormatError(std::string("MDP document is missing '") + key + "'");
  const auto S = doc.at("n_states").get<std::size_t>();
  const auto A = doc.at("n_actions").get<std::size_t>();
  const auto flat = doc.at("transition").get<std::vector<double>>();
  if (flat.size() != S * A * S) {
    std::ostringstream msg;
    msg << "transition has " << flat.size() << " entries, expected n_states*n_actions*n_states = " << S * A * S;
    throw FormatError(msg.str());
  }
  Matrix T(static_cast<Eigen::Index>(S * A), static_cast<Eigen::Index>(S));
  for (std::size_t r = 0; r < S * A; ++r)
    for (std::size_t c = 0; c < S; ++c) T(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * S + c];
  const auto init = doc.at("initial").get<std::vector<double>>();
  Vector rho0 = Eigen::Map<const Vector>(init.data(), static_cast<Eigen::Index>(init.size()));
  std::optional<Matrix> reward;
  if (doc.contains("reward")) {
    const auto rf = doc.at("reward").get<std::vector<double>>();
    if (rf.size() != S * S) throw FormatError("reward has " + std::to_string(rf.size()) + " entries, expected n_states^2");
    Matrix R(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
    for (std::size_t r = 0; r < S; ++r)
      for (std::size_t c = 0; c < S; ++c) R(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rf[r * S + c];
    reward = std::move(R);
  }
  return FiniteMDP(S, A, std::move(T), std::move(rho0), doc.at("discount").get<double>(), std::move(reward));
}

inline FiniteMDP load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open MDP file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("MDP file '" + path + "' is not valid JSON: " + e.what());
  }
  return mdp_from_json(doc);
}

inline void save_mdp(const FiniteMDP& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write MDP file '" + path + "'");
  out << to_json(mdp).dump(2) << '\n';
}

}  // namespace depo::mdp
