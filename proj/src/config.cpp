// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/config.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "relief/error.hpp"

namespace relief {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json load_json_file(const std::string& path) {
  std::string bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& bytes) {
  if (path == "-") {
    std::cout << bytes;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << bytes;
  if (!out) throw ConfigError("write failed: " + path);
}

OptimizeInput OptimizeInput::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("state must be an object");
  OptimizeInput in;
  AgencyState& s = in.state;
  bool have_xi = false;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "T") s.T = v.get<double>();
      else if (k == "T_plus") s.T_plus = v.get<double>();
      else if (k == "R") s.R = v.get<std::vector<int>>();
      else if (k == "U") s.U = v.get<std::vector<int>>();
      else if (k == "W") s.W = v.get<double>();
      else if (k == "w") s.w = v.get<std::vector<double>>();
      else if (k == "c") s.c = v.get<std::vector<double>>();
      else if (k == "xi") {
        s.xi = v.get<std::vector<double>>();
        have_xi = true;
      } else if (k == "phi") in.dep.phi = v.get<double>();
      else if (k == "b") in.dep.b = v.get<double>();
      else if (k == "T_plus_max") in.T_plus_max = v.get<double>();
      else if (k == "h_c") in.h_c = v.get<std::vector<double>>();
      else if (k == "unmet") {
        for (const auto& blocks : v) {
          std::vector<UnitBlock> row;
          for (const auto& b : blocks) {
            if (!b.is_array() || b.size() != 2) {
              throw ConfigError("unmet blocks are [time, quantity] pairs");
            }
            row.push_back({b[0].get<double>(), b[1].get<int>()});
          }
          s.unmet.push_back(std::move(row));
        }
      } else {
        throw ConfigError("unknown state key: " + k);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("state: ") + e.what());
  }
  const std::size_t K = s.R.size();
  if (s.U.empty()) {
    s.U.assign(K, 0);
    for (std::size_t k = 0; k < K && k < s.unmet.size(); ++k) {
      for (const auto& b : s.unmet[k]) s.U[k] += b.quantity;
    }
  }
  if (s.w.empty()) s.w.assign(K, 1.0);
  if (!have_xi) s.xi.assign(K, s.T_plus + (s.T_plus - s.T));
  if (in.T_plus_max == 0.0) in.T_plus_max = s.T_plus;
  if (in.h_c.empty()) in.h_c.assign(K, 1.0);
  s.validate();
  if (in.h_c.size() != K) throw ValidationError("h_c needs one value per type");
  if (!(in.T_plus_max >= s.T_plus)) {
    throw ValidationError("T_plus_max must not precede T_plus");
  }
  for (double xi : s.xi) {
    if (!(xi > in.T_plus_max)) throw ValidationError("xi_k must exceed T_plus_max");
  }
  return in;
}

nlohmann::ordered_json OptimizeInput::to_json() const {
  nlohmann::ordered_json j;
  j["T"] = state.T;
  j["T_plus"] = state.T_plus;
  j["R"] = state.R;
  j["U"] = state.U;
  auto& u = j["unmet"] = nlohmann::ordered_json::array();
  for (const auto& blocks : state.unmet) {
    auto row = nlohmann::ordered_json::array();
    for (const auto& b : blocks) row.push_back({b.time, b.quantity});
    u.push_back(std::move(row));
  }
  j["W"] = state.W;
  j["w"] = state.w;
  j["c"] = state.c;
  j["xi"] = state.xi;
  j["phi"] = dep.phi;
  j["b"] = dep.b;
  j["T_plus_max"] = T_plus_max;
  j["h_c"] = h_c;
  return j;
}

BenchConfig BenchConfig::Default() {
  BenchConfig b;
  b.horizon.first_request = 12.0;
  for (double W = 180; W <= 230; W += 10) b.grid.W.push_back(W);
  return b;
}

void BenchConfig::validate() const {
  horizon.validate();
  sim.validate();
  if (datasets < 1) throw ConfigError("datasets must be >= 1");
  if (methods.empty()) throw ConfigError("no methods given");
  for (const auto& m : methods) ParseMethod(m);
  if (grid.param != "W" && grid.param != "c") {
    throw ConfigError("grid parameter must be W or c");
  }
  if (grid.size() == 0) throw ConfigError("grid is empty");
}

nlohmann::ordered_json BenchConfig::to_json() const {
  nlohmann::ordered_json j;
  j["horizon"] = horizon.to_json();
  j["sim"] = sim.to_json();
  j["datasets"] = datasets;
  j["methods"] = methods;
  j["grid"]["param"] = grid.param;
  if (grid.param == "W") {
    j["grid"]["values"] = grid.W;
  } else {
    j["grid"]["values"] = grid.c;
  }
  return j;
}

BenchConfig BenchConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("bench config must be an object");
  BenchConfig b = Default();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "horizon") {
        // Keys given here override the bench defaults, not the plain ones.
        nlohmann::json merged = b.horizon.to_json();
        merged.update(v);
        b.horizon = HorizonConfig::from_json(merged);
      } else if (k == "sim") {
        b.sim = SimConfig::from_json(v);
      } else if (k == "datasets") {
        b.datasets = v.get<int>();
      } else if (k == "methods") {
        b.methods = v.get<std::vector<std::string>>();
      } else if (k == "grid") {
        SweepGrid g;
        for (auto gi = v.begin(); gi != v.end(); ++gi) {
          if (gi.key() == "param") g.param = gi.value().get<std::string>();
          else if (gi.key() != "values") throw ConfigError("unknown grid key: " + gi.key());
        }
        if (!v.contains("values")) throw ConfigError("grid needs values");
        if (g.param == "W") g.W = v["values"].get<std::vector<double>>();
        else g.c = v["values"].get<std::vector<std::vector<double>>>();
        b.grid = std::move(g);
      } else {
        throw ConfigError("unknown bench key: " + k);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
  b.validate();
  return b;
}

nlohmann::ordered_json sequence_to_json(const EventSequence& seq) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& e : seq.events()) {
    nlohmann::ordered_json row;
    row["time"] = e.time;
    row["q"] = e.quantities;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace relief
