#ifndef PMCTMC_DATASET_HPP
#define PMCTMC_DATASET_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/reaction.hpp"

namespace pmctmc {

struct Observation {
  double t = 0.0;
  State x;
};

inline bool operator==(const Observation& a, const Observation& b) {
  return a.t == b.t && a.x == b.x;
}

/// Observations x_0, ..., x_{n_d} at strictly increasing times. Transition i
/// (1-based) goes from x_{i-1} to x_i over t_i - t_{i-1}.
struct Dataset {
  std::vector<Observation> observations;

  std::size_t n_transitions() const {
    return observations.empty() ? 0 : observations.size() - 1;
  }
  double dt(std::size_t i) const { return observations[i].t - observations[i - 1].t; }
  const State& from(std::size_t i) const { return observations[i - 1].x; }
  const State& to(std::size_t i) const { return observations[i].x; }

  /// Common spacing if all gaps agree to 1e-9 relative.
  std::optional<double> regular_dt() const {
    if (n_transitions() == 0) return std::nullopt;
    const double d0 = dt(1);
    for (std::size_t i = 2; i <= n_transitions(); ++i) {
      if (std::abs(dt(i) - d0) > 1e-9 * std::abs(d0)) return std::nullopt;
    }
    return d0;
  }

  void validate(const ReactionNetwork& net) const {
    if (observations.size() < 2) throw UsageError("dataset needs at least two observations");
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const auto& o = observations[i];
      if (!std::isfinite(o.t)) throw UsageError("observation time must be finite");
      if (i > 0 && !(o.t > observations[i - 1].t)) {
        throw UsageError("observation times must be strictly increasing");
      }
      if (o.x.size() != net.n_species()) {
        throw UsageError("observation " + std::to_string(i) + " has wrong number of species");
      }
      net.check_state(o.x);
    }
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.observations == b.observations;
  }
};

/// Metadata stored beside a dataset CSV.
struct DatasetInfo {
  std::string model;
  int servers = 1;
  State lower;
  State upper;
  Theta theta;
};

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

namespace detail {

inline nlohmann::json bounds_to_json(const State& b) {
  nlohmann::json j = nlohmann::json::array();
  for (auto v : b) {
    if (v == kUnboundedAbove || v == kUnboundedBelow) {
      j.push_back(nullptr);
    } else {
      j.push_back(v);
    }
  }
  return j;
}

inline State bounds_from_json(const nlohmann::json& j, bool upper) {
  State out;
  for (const auto& v : j) {
    out.push_back(v.is_null() ? (upper ? kUnboundedAbove : kUnboundedBelow) : v.get<std::int64_t>());
  }
  return out;
}

}  // namespace detail

inline void write_dataset(const std::string& path, const Dataset& data,
                          const std::optional<DatasetInfo>& info = std::nullopt) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write dataset '" + path + "'");
  const std::size_t ns = data.observations.empty() ? 0 : data.observations.front().x.size();
  out << 't';
  for (std::size_t j = 0; j < ns; ++j) out << ",species_" << (j + 1);
  out << '\n';
  out << std::setprecision(17);
  for (const auto& o : data.observations) {
    out << o.t;
    for (auto v : o.x) out << ',' << v;
    out << '\n';
  }
  if (info) {
    nlohmann::json j;
    j["model"] = info->model;
    j["servers"] = info->servers;
    j["lower_bounds"] = detail::bounds_to_json(info->lower);
    j["upper_bounds"] = detail::bounds_to_json(info->upper);
    j["theta"] = info->theta;
    j["n_species"] = ns;
    std::ofstream side(sidecar_path(path));
    if (!side) throw UsageError("cannot write sidecar for '" + path + "'");
    side << j.dump(2) << '\n';
  }
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw UsageError("dataset '" + path + "' is empty");
  std::size_t columns = 1;
  for (char c : line) columns += c == ',' ? 1 : 0;
  if (line.rfind("t", 0) != 0 || columns < 2) {
    throw UsageError("dataset '" + path + "' lacks a 't,species_...' header");
  }
  Dataset data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Observation o;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        if (col == 0) {
          o.t = std::stod(cell, &used);
        } else {
          o.x.push_back(std::stoll(cell, &used));
        }
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw UsageError("dataset '" + path + "' line " + std::to_string(lineno) +
                         ": cannot parse '" + cell + "'");
      }
      ++col;
    }
    if (col != columns) {
      throw UsageError("dataset '" + path + "' line " + std::to_string(lineno) +
                       " has wrong number of columns");
    }
    data.observations.push_back(std::move(o));
  }
  return data;
}

inline std::optional<DatasetInfo> read_dataset_info(const std::string& csv_path) {
  std::ifstream in(sidecar_path(csv_path));
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
    DatasetInfo info;
    info.model = j.value("model", std::string{});
    info.servers = j.value("servers", 1);
    if (j.contains("lower_bounds")) info.lower = detail::bounds_from_json(j["lower_bounds"], false);
    if (j.contains("upper_bounds")) info.upper = detail::bounds_from_json(j["upper_bounds"], true);
    if (j.contains("theta")) info.theta = j["theta"].get<Theta>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed sidecar for '" + csv_path + "': " + e.what());
  }
}

}  // namespace pmctmc

#endif  // PMCTMC_DATASET_HPP
