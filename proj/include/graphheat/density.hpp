#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "graphheat/calculus.hpp"
#include "graphheat/graph.hpp"

namespace graphheat {

/// Which side of a uniqueness threshold a density family bounds.
enum class BoundSide { lower, upper };

enum class DensityFamily { constant, power_decay, outer_degree_scaled, log_power, custom };

inline const char* to_string(DensityFamily f) {
  switch (f) {
    case DensityFamily::constant: return "constant";
    case DensityFamily::power_decay: return "power_decay";
    case DensityFamily::outer_degree_scaled: return "outer_degree_scaled";
    case DensityFamily::log_power: return "log_power";
    case DensityFamily::custom: return "custom";
  }
  return "unknown";
}

/// Density rho > 0, evaluated from the distance to the family's canonical seed.
///
///   constant             rho = c
///   power_decay          rho = c (1 + d)^(-alpha), d = r or |x|
///   outer_degree_scaled  rho = rho0 D+(x) / (r + 1)
///   log_power            rho = D+(x) / (r + 1) * exp(rho0 log^beta(r + 2))
class DensitySpec {
 public:
  static DensitySpec constant(double c) {
    DensitySpec d(DensityFamily::constant, BoundSide::lower, Metric::combinatorial);
    d.params_ = {{"c", c}};
    d.check_positive("c", c);
    return d;
  }
  static DensitySpec power_decay(double c, double alpha, Metric metric, BoundSide side) {
    DensitySpec d(DensityFamily::power_decay, side, metric);
    d.params_ = {{"c", c}, {"alpha", alpha}};
    d.check_positive("c", c);
    if (!(alpha >= 0.0)) throw PreconditionError("power decay exponent must be >= 0");
    return d;
  }
  static DensitySpec outer_degree_scaled(double rho0) {
    DensitySpec d(DensityFamily::outer_degree_scaled, BoundSide::lower, Metric::combinatorial);
    d.params_ = {{"rho0", rho0}};
    d.check_positive("rho0", rho0);
    return d;
  }
  static DensitySpec log_power(double rho0, double beta) {
    DensitySpec d(DensityFamily::log_power, BoundSide::lower, Metric::combinatorial);
    d.params_ = {{"rho0", rho0}, {"beta", beta}};
    d.check_positive("rho0", rho0);
    if (!(beta > 0.0 && beta <= 1.0)) throw PreconditionError("log_power beta must lie in (0, 1]");
    return d;
  }
  static DensitySpec custom(std::function<double(const WeightedGraph&, const VertexId&)> f, std::string name,
                            BoundSide side = BoundSide::lower) {
    DensitySpec d(DensityFamily::custom, side, Metric::combinatorial);
    d.custom_ = std::move(f);
    d.name_ = std::move(name);
    return d;
  }

  /// Same density multiplied by c > 0.
  DensitySpec scaled(double c) const {
    check_positive("scale", c);
    DensitySpec d = *this;
    d.scale_ *= c;
    return d;
  }

  double operator()(const WeightedGraph& g, const VertexId& x) const {
    double v = 0.0;
    switch (family_) {
      case DensityFamily::constant: v = params_.at("c"); break;
      case DensityFamily::power_decay: {
        const double d = metric_ == Metric::euclidean ? euclidean_norm(x)
                                                      : static_cast<double>(canonical_radius(g, x));
        v = params_.at("c") * std::pow(1.0 + d, -params_.at("alpha"));
        break;
      }
      case DensityFamily::outer_degree_scaled: {
        const double r = static_cast<double>(canonical_radius(g, x));
        v = params_.at("rho0") * outer_degree(g, x) / (r + 1.0);
        break;
      }
      case DensityFamily::log_power: {
        const double r = static_cast<double>(canonical_radius(g, x));
        v = outer_degree(g, x) / (r + 1.0) *
            std::exp(params_.at("rho0") * std::pow(std::log(r + 2.0), params_.at("beta")));
        break;
      }
      case DensityFamily::custom: v = custom_(g, x); break;
    }
    v *= scale_;
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("density is not positive and finite at " + x.to_string());
    return v;
  }

  VertexFunction bind(const WeightedGraph& g) const {
    return [d = *this, g](const VertexId& x) { return d(g, x); };
  }

  /// Values on the interior of a region.
  Eigen::VectorXd on_interior(const FiniteRegion& region) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(region.interior_size()));
    for (std::size_t i = 0; i < region.interior_size(); ++i)
      v[static_cast<Eigen::Index>(i)] = (*this)(region.graph(), region.vertex(i));
    return v;
  }

  DensityFamily family() const { return family_; }
  BoundSide side() const { return side_; }
  Metric metric() const { return metric_; }
  double scale() const { return scale_; }
  double param(const std::string& key) const {
    const auto it = params_.find(key);
    if (it == params_.end()) throw PreconditionError(std::string(to_string(family_)) + " has no parameter " + key);
    return it->second;
  }
  const std::map<std::string, double>& params() const { return params_; }

  std::string describe() const {
    std::string s = family_ == DensityFamily::custom ? name_ : to_string(family_);
    s += "(";
    bool first = true;
    for (const auto& [k, v] : params_) {
      s += (first ? "" : ", ") + k + "=" + std::to_string(v);
      first = false;
    }
    if (scale_ != 1.0) s += std::string(first ? "" : ", ") + "scale=" + std::to_string(scale_);
    return s + ")";
  }

 private:
  DensitySpec(DensityFamily f, BoundSide side, Metric metric) : family_(f), side_(side), metric_(metric) {}

  static void check_positive(const char* what, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError(std::string(what) + " must be > 0");
  }
  static double outer_degree(const WeightedGraph& g, const VertexId& x) {
    const auto oi = g.model().canonical_outer_inner(x);
    if (!oi) throw PreconditionError(g.family().describe() + " has no closed-form outer degree");
    return oi->first;
  }

  DensityFamily family_;
  BoundSide side_;
  Metric metric_;
  std::map<std::string, double> params_;
  double scale_ = 1.0;
  std::function<double(const WeightedGraph&, const VertexId&)> custom_;
  std::string name_;
};

}  // namespace graphheat
