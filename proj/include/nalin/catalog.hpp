#pragma once

#include "nalin/common.hpp"
#include "nalin/evolution.hpp"

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nalin {

struct CatalogEntry {
  std::string name;
  std::string description;
  std::shared_ptr<const EvolutionFamily> family;
  /// Parameters after defaults were filled in.
  std::map<std::string, double> parameters;
  /// Eigenvalues of A for autonomous entries.
  std::vector<std::complex<double>> eigenvalues;
  /// Number of stable directions when known in advance.
  std::optional<int> stable_dimension;
  /// Quadratic coefficient c / (lambda - lambda^2) of the conjugacy of a scalar time-one map
  /// lambda x + c x^2.
  std::optional<double> series_coefficient;
};

std::vector<std::string> catalog_names();
/// Default parameters of an entry; unknown names raise a config error.
std::map<std::string, double> catalog_defaults(const std::string& name);

/// Builds the entry on [t_min, t_max]. Parameters not listed in catalog_defaults raise a config error.
CatalogEntry make_catalog_entry(const std::string& name, const std::map<std::string, double>& parameters,
                                double t_min, double t_max, const IntegratorSettings& integrator = {});

}  // namespace nalin
