#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "graphheat/common.hpp"
#include "graphheat/vertex.hpp"

namespace graphheat {

struct Neighbor {
  VertexId vertex;
  double weight;
};

enum class Metric { combinatorial, euclidean };

inline const char* to_string(Metric m) {
  return m == Metric::combinatorial ? "combinatorial" : "euclidean";
}

// ---------------------------------------------------------------------------
// Integer rules m -> k(m) for branching functions and sphere sizes.

class IntRule {
 public:
  static IntRule constant(std::int64_t c) {
    return IntRule([c](std::int64_t) { return c; }, "const:" + std::to_string(c));
  }
  /// a + b*m
  static IntRule affine(std::int64_t a, std::int64_t b) {
    return IntRule([a, b](std::int64_t m) { return a + b * m; },
                   "affine:" + std::to_string(a) + "," + std::to_string(b));
  }
  /// Explicit values; the last value repeats past the end of the list.
  static IntRule list(std::vector<std::int64_t> values) {
    if (values.empty()) throw PreconditionError("list rule needs at least one value");
    std::string desc = "list:";
    for (std::size_t i = 0; i < values.size(); ++i)
      desc += (i ? "," : "") + std::to_string(values[i]);
    return IntRule(
        [v = std::move(values)](std::int64_t m) {
          return v[std::min<std::size_t>(static_cast<std::size_t>(m), v.size() - 1)];
        },
        desc);
  }
  static IntRule custom(std::function<std::int64_t(std::int64_t)> f, std::string desc) {
    return IntRule(std::move(f), std::move(desc));
  }

  /// Parses "const:c", "affine:a,b" or "list:v0,v1,...".
  static IntRule parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw PreconditionError("rule '" + text + "' lacks a ':'");
    const std::string head = text.substr(0, colon);
    std::vector<std::int64_t> args;
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        args.push_back(std::stoll(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw PreconditionError("rule '" + text + "': '" + item + "' is not an integer");
      }
    }
    if (head == "const" && args.size() == 1) return constant(args[0]);
    if (head == "affine" && args.size() == 2) return affine(args[0], args[1]);
    if (head == "list" && !args.empty()) return list(std::move(args));
    throw PreconditionError("unrecognized rule '" + text + "'");
  }

  std::int64_t operator()(std::int64_t m) const { return f_(m); }
  const std::string& descriptor() const { return desc_; }

 private:
  IntRule(std::function<std::int64_t(std::int64_t)> f, std::string desc)
      : f_(std::move(f)), desc_(std::move(desc)) {}
  std::function<std::int64_t(std::int64_t)> f_;
  std::string desc_;
};

// ---------------------------------------------------------------------------

/// Per-shell data of a weakly spherically symmetric graph (shells 0..M).
/// Cardinalities are stored as doubles: tree shells overflow 64 bits quickly.
struct RadialProfile {
  std::vector<double> d_plus;
  std::vector<double> d_minus;
  std::vector<double> shell_measure;
  std::vector<double> shell_card;

  std::size_t max_shell() const { return d_plus.empty() ? 0 : d_plus.size() - 1; }
  std::size_t size() const { return d_plus.size(); }

  /// Edge mass between shells m and m+1 counted from shell m.
  double edge_mass(std::size_t m) const { return d_plus[m] * shell_measure[m]; }

  /// max_m |D+(m)|S_m| - D-(m+1)|S_{m+1}|| / max(both); 0 for a consistent profile.
  double detailed_balance_residual() const {
    double worst = 0.0;
    for (std::size_t m = 0; m + 1 < size(); ++m) {
      const double a = d_plus[m] * shell_measure[m];
      const double b = d_minus[m + 1] * shell_measure[m + 1];
      const double s = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::min()});
      worst = std::max(worst, std::abs(a - b) / s);
    }
    return worst;
  }
};

enum class AntitreeConvention { A, B };

inline const char* to_string(AntitreeConvention c) { return c == AntitreeConvention::A ? "A" : "B"; }

struct FamilyTag {
  enum class Kind { lattice, tree, antitree, chain, custom };
  Kind kind = Kind::custom;
  int dimension = 0;           // lattice
  std::string rule;            // tree branching / anti-tree sphere size
  AntitreeConvention convention = AntitreeConvention::B;
  std::int64_t depth = 0;      // radial families: last shell whose neighbors are served

  bool is_radial() const {
    return kind == Kind::tree || kind == Kind::antitree || kind == Kind::chain;
  }
  std::string describe() const {
    switch (kind) {
      case Kind::lattice: return "lattice(n=" + std::to_string(dimension) + ")";
      case Kind::tree: return "tree(" + rule + ", depth=" + std::to_string(depth) + ")";
      case Kind::antitree:
        return "antitree(" + rule + ", convention " + to_string(convention) +
               ", depth=" + std::to_string(depth) + ")";
      case Kind::chain: return "shell-chain(depth=" + std::to_string(depth) + ")";
      case Kind::custom: return "custom";
    }
    return "unknown";
  }
};

/// Neighbor oracle of an (infinite) weighted graph.
class GraphModel {
 public:
  virtual ~GraphModel() = default;
  virtual void neighbors(const VertexId& x, std::vector<Neighbor>& out) const = 0;
  virtual double measure(const VertexId& x) const = 0;

  /// Closed-form data relative to the family's canonical seed (root or origin).
  virtual std::optional<VertexId> canonical_seed() const { return std::nullopt; }
  virtual std::optional<std::int64_t> canonical_distance(const VertexId&) const { return std::nullopt; }
  virtual std::optional<std::pair<double, double>> canonical_outer_inner(const VertexId&) const {
    return std::nullopt;
  }
  virtual std::optional<RadialProfile> closed_form_profile(std::int64_t /*max_shell*/) const {
    return std::nullopt;
  }
};

class WeightedGraph {
 public:
  WeightedGraph(std::shared_ptr<const GraphModel> model, FamilyTag tag)
      : model_(std::move(model)), tag_(std::move(tag)) {}

  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const {
    out.clear();
    model_->neighbors(x, out);
  }
  std::vector<Neighbor> neighbors(const VertexId& x) const {
    std::vector<Neighbor> out;
    neighbors(x, out);
    return out;
  }
  double measure(const VertexId& x) const { return model_->measure(x); }

  /// deg(x) = sum of edge weights at x.
  double degree(const VertexId& x) const {
    double d = 0.0;
    for (const auto& nb : neighbors(x)) d += nb.weight;
    return d;
  }
  /// Deg(x) = deg(x) / mu(x).
  double normalized_degree(const VertexId& x) const { return degree(x) / measure(x); }

  const FamilyTag& family() const { return tag_; }
  const GraphModel& model() const { return *model_; }
  const std::shared_ptr<const GraphModel>& model_ptr() const { return model_; }

 private:
  std::shared_ptr<const GraphModel> model_;
  FamilyTag tag_;
};

namespace detail {

inline bool mul_overflows(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

class LatticeModel final : public GraphModel {
 public:
  explicit LatticeModel(int n) : n_(n) {}

  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const override {
    check(x);
    for (int k = 0; k < n_; ++k) {
      out.push_back({x.shifted(k, -1), 1.0});
      out.push_back({x.shifted(k, +1), 1.0});
    }
  }
  double measure(const VertexId& x) const override {
    check(x);
    return 2.0 * n_;
  }
  std::optional<VertexId> canonical_seed() const override {
    std::vector<std::int64_t> zero(static_cast<std::size_t>(n_), 0);
    return VertexId::lattice(zero);
  }
  std::optional<std::int64_t> canonical_distance(const VertexId& x) const override {
    check(x);
    std::int64_t d = 0;
    for (auto c : x.coords()) d += c < 0 ? -c : c;
    return d;
  }
  /// Outer/inner degree w.r.t. the origin: nonzero coordinates contribute one
  /// step outward and one inward, zero coordinates two outward steps.
  std::optional<std::pair<double, double>> canonical_outer_inner(const VertexId& x) const override {
    check(x);
    int zeros = 0;
    for (auto c : x.coords()) zeros += (c == 0);
    const double mu = 2.0 * n_;
    if (zeros == n_) return std::pair{2.0 * n_ / mu, 0.0};
    return std::pair{(n_ + zeros) / mu, (n_ - zeros) / mu};
  }

 private:
  void check(const VertexId& x) const {
    if (x.kind() != VertexKind::lattice || static_cast<int>(x.dim()) != n_)
      throw PreconditionError("vertex " + x.to_string() + " is not in Z^" + std::to_string(n_));
  }
  int n_;
};

/// Shared machinery of trees and anti-trees: shells 0..depth+1, cards per shell.
class RadialModelBase : public GraphModel {
 public:
  std::optional<VertexId> canonical_seed() const override { return VertexId::radial(0, 0); }
  std::optional<std::int64_t> canonical_distance(const VertexId& x) const override {
    check(x, depth_ + 1);
    return x.shell();
  }

 protected:
  RadialModelBase(std::int64_t depth, std::vector<std::int64_t> cards)
      : depth_(depth), cards_(std::move(cards)) {}

  /// Cards beyond 2^62 are unrepresentable as ordinals and stored as -1.
  void check(const VertexId& x, std::int64_t max_shell) const {
    if (x.kind() != VertexKind::radial)
      throw PreconditionError("vertex " + x.to_string() + " is not a radial vertex");
    const auto m = x.shell();
    if (m < 0 || m > max_shell)
      throw PreconditionError("vertex " + x.to_string() + " lies beyond materializable depth " +
                              std::to_string(max_shell));
    const auto card = cards_[static_cast<std::size_t>(m)];
    if (card < 0)
      throw BudgetExceededError("shell " + std::to_string(m) + " has more than 2^62 vertices");
    if (x.ordinal() < 0 || x.ordinal() >= card)
      throw PreconditionError("vertex " + x.to_string() + " has an ordinal outside its shell");
  }

  std::int64_t depth_;
  std::vector<std::int64_t> cards_;
};

class TreeModel final : public RadialModelBase {
 public:
  static std::shared_ptr<TreeModel> create(const IntRule& branching, std::int64_t depth) {
    std::vector<std::int64_t> b(static_cast<std::size_t>(depth + 2));
    for (std::int64_t m = 0; m <= depth + 1; ++m) {
      b[static_cast<std::size_t>(m)] = branching(m);
      if (m <= depth && b[static_cast<std::size_t>(m)] < 1)
        throw PreconditionError("branching b(" + std::to_string(m) + ") = " +
                                std::to_string(b[static_cast<std::size_t>(m)]) + " must be >= 1");
    }
    std::vector<std::int64_t> cards(static_cast<std::size_t>(depth + 2));
    cards[0] = 1;
    for (std::size_t m = 1; m < cards.size(); ++m) {
      std::int64_t c = 0;
      if (cards[m - 1] < 0 || mul_overflows(cards[m - 1], b[m - 1], c) || c > (std::int64_t{1} << 62))
        c = -1;
      cards[m] = c;
    }
    return std::shared_ptr<TreeModel>(new TreeModel(depth, std::move(cards), std::move(b)));
  }

  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const override {
    check(x, depth_);
    const auto m = x.shell();
    const auto k = x.ordinal();
    if (m > 0) out.push_back({VertexId::radial(m - 1, k / b_[static_cast<std::size_t>(m - 1)]), 1.0});
    const auto bm = b_[static_cast<std::size_t>(m)];
    std::int64_t first = 0;
    if (mul_overflows(k, bm, first) || cards_[static_cast<std::size_t>(m + 1)] < 0)
      throw BudgetExceededError("children of " + x.to_string() + " are not representable");
    for (std::int64_t i = 0; i < bm; ++i) out.push_back({VertexId::radial(m + 1, first + i), 1.0});
  }
  double measure(const VertexId& x) const override {
    check(x, depth_ + 1);
    return 1.0;
  }
  std::optional<std::pair<double, double>> canonical_outer_inner(const VertexId& x) const override {
    check(x, depth_);
    const auto m = static_cast<std::size_t>(x.shell());
    return std::pair{static_cast<double>(b_[m]), m == 0 ? 0.0 : 1.0};
  }
  std::optional<RadialProfile> closed_form_profile(std::int64_t max_shell) const override {
    if (max_shell < 0 || max_shell > depth_)
      throw PreconditionError("profile shell " + std::to_string(max_shell) + " beyond tree depth");
    RadialProfile p;
    double card = 1.0;
    for (std::int64_t m = 0; m <= max_shell; ++m) {
      const auto i = static_cast<std::size_t>(m);
      p.d_plus.push_back(static_cast<double>(b_[i]));
      p.d_minus.push_back(m == 0 ? 0.0 : 1.0);
      p.shell_card.push_back(card);
      p.shell_measure.push_back(card);
      card *= static_cast<double>(b_[i]);
    }
    return p;
  }

 private:
  TreeModel(std::int64_t depth, std::vector<std::int64_t> cards, std::vector<std::int64_t> b)
      : RadialModelBase(depth, std::move(cards)), b_(std::move(b)) {}
  std::vector<std::int64_t> b_;
};

/// Anti-tree: every vertex of S_m is joined to every vertex of S_{m+1}.
///
/// Convention B keeps unit weights and measure, so D+(m) = s(m+1), D-(m) = s(m-1).
/// Convention A rescales the inter-shell weights and the shell measure so that
/// D+(m) = s(m-1) and D-(m) = s(m+1) for m >= 1:
///   w(m, m+1) = [s(0)s(1) / (s(m)s(m+1))]^2,  mu(m) = s(m+1) w(m, m+1) / s(m-1),  mu(0) = 1.
class AntitreeModel final : public RadialModelBase {
 public:
  static std::shared_ptr<AntitreeModel> create(const IntRule& sphere, AntitreeConvention conv,
                                               std::int64_t depth) {
    if (sphere(0) != 1)
      throw PreconditionError("anti-tree sphere size must satisfy s(0) = 1, got " +
                              std::to_string(sphere(0)));
    const auto shells = static_cast<std::size_t>(depth + 3);
    std::vector<std::int64_t> s(shells);
    for (std::size_t m = 0; m < shells; ++m) {
      s[m] = sphere(static_cast<std::int64_t>(m));
      if (s[m] < 1)
        throw PreconditionError("sphere size s(" + std::to_string(m) + ") must be >= 1");
    }
    std::vector<double> w(shells - 1), mu(shells - 1);
    for (std::size_t m = 0; m + 1 < shells; ++m) {
      if (conv == AntitreeConvention::B) {
        w[m] = 1.0;
      } else {
        const double r = static_cast<double>(s[0]) * static_cast<double>(s[1]) /
                         (static_cast<double>(s[m]) * static_cast<double>(s[m + 1]));
        w[m] = r * r;
      }
    }
    for (std::size_t m = 0; m + 1 < shells; ++m) {
      if (conv == AntitreeConvention::B || m == 0)
        mu[m] = 1.0;
      else
        mu[m] = static_cast<double>(s[m + 1]) * w[m] / static_cast<double>(s[m - 1]);
    }
    std::vector<std::int64_t> cards(s.begin(), s.end() - 1);
    return std::shared_ptr<AntitreeModel>(
        new AntitreeModel(depth, std::move(cards), std::move(s), std::move(w), std::move(mu)));
  }

  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const override {
    check(x, depth_);
    const auto m = static_cast<std::size_t>(x.shell());
    if (m > 0)
      for (std::int64_t i = 0; i < s_[m - 1]; ++i)
        out.push_back({VertexId::radial(static_cast<std::int64_t>(m) - 1, i), w_[m - 1]});
    for (std::int64_t i = 0; i < s_[m + 1]; ++i)
      out.push_back({VertexId::radial(static_cast<std::int64_t>(m) + 1, i), w_[m]});
  }
  double measure(const VertexId& x) const override {
    check(x, depth_ + 1);
    return mu_[static_cast<std::size_t>(x.shell())];
  }
  std::optional<std::pair<double, double>> canonical_outer_inner(const VertexId& x) const override {
    check(x, depth_);
    return outer_inner(static_cast<std::size_t>(x.shell()));
  }
  std::optional<RadialProfile> closed_form_profile(std::int64_t max_shell) const override {
    if (max_shell < 0 || max_shell > depth_)
      throw PreconditionError("profile shell " + std::to_string(max_shell) + " beyond anti-tree depth");
    RadialProfile p;
    for (std::size_t m = 0; m <= static_cast<std::size_t>(max_shell); ++m) {
      const auto [dp, dm] = outer_inner(m);
      p.d_plus.push_back(dp);
      p.d_minus.push_back(dm);
      p.shell_card.push_back(static_cast<double>(s_[m]));
      p.shell_measure.push_back(static_cast<double>(s_[m]) * mu_[m]);
    }
    return p;
  }

 private:
  AntitreeModel(std::int64_t depth, std::vector<std::int64_t> cards, std::vector<std::int64_t> s,
                std::vector<double> w, std::vector<double> mu)
      : RadialModelBase(depth, std::move(cards)), s_(std::move(s)), w_(std::move(w)), mu_(std::move(mu)) {}

  std::pair<double, double> outer_inner(std::size_t m) const {
    const double dp = static_cast<double>(s_[m + 1]) * w_[m] / mu_[m];
    const double dm = m == 0 ? 0.0 : static_cast<double>(s_[m - 1]) * w_[m - 1] / mu_[m];
    return {dp, dm};
  }

  std::vector<std::int64_t> s_;
  std::vector<double> w_;
  std::vector<double> mu_;
};

/// Weighted half-line on shells 0..M: mu(m) = |S_m|_mu, w(m, m+1) = D+(m)|S_m|_mu.
/// Its Laplacian on shell functions is exactly the radial Laplacian of the profile.
class ShellChainModel final : public GraphModel {
 public:
  explicit ShellChainModel(RadialProfile p) : p_(std::move(p)) {}

  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const override {
    const auto m = check(x, p_.max_shell());
    if (m > 0) out.push_back({VertexId::radial(static_cast<std::int64_t>(m) - 1, 0), p_.edge_mass(m - 1)});
    if (p_.d_plus[m] > 0.0)
      out.push_back({VertexId::radial(static_cast<std::int64_t>(m) + 1, 0), p_.edge_mass(m)});
  }
  double measure(const VertexId& x) const override { return p_.shell_measure[check(x, p_.max_shell())]; }
  std::optional<VertexId> canonical_seed() const override { return VertexId::radial(0, 0); }
  std::optional<std::int64_t> canonical_distance(const VertexId& x) const override {
    return static_cast<std::int64_t>(check(x, p_.max_shell() + 1));
  }
  std::optional<std::pair<double, double>> canonical_outer_inner(const VertexId& x) const override {
    const auto m = check(x, p_.max_shell());
    return std::pair{p_.d_plus[m], p_.d_minus[m]};
  }
  std::optional<RadialProfile> closed_form_profile(std::int64_t max_shell) const override {
    if (max_shell < 0 || static_cast<std::size_t>(max_shell) > p_.max_shell())
      throw PreconditionError("profile shell beyond chain length");
    RadialProfile q = p_;
    const auto n = static_cast<std::size_t>(max_shell) + 1;
    q.d_plus.resize(n);
    q.d_minus.resize(n);
    q.shell_measure.resize(n);
    q.shell_card.resize(n);
    return q;
  }
  const RadialProfile& profile() const { return p_; }

 private:
  std::size_t check(const VertexId& x, std::size_t max_shell) const {
    if (x.kind() != VertexKind::radial || x.ordinal() != 0 || x.shell() < 0 ||
        static_cast<std::size_t>(x.shell()) > max_shell)
      throw PreconditionError("vertex " + x.to_string() + " is not a shell of this chain");
    return static_cast<std::size_t>(x.shell());
  }
  RadialProfile p_;
};

class CustomModel final : public GraphModel {
 public:
  std::unordered_map<VertexId, std::vector<Neighbor>, VertexHash> adjacency;
  std::unordered_map<VertexId, double, VertexHash> measures;

  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const override {
    const auto it = adjacency.find(x);
    if (it == adjacency.end()) throw PreconditionError("vertex " + x.to_string() + " not in graph");
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  double measure(const VertexId& x) const override {
    const auto it = measures.find(x);
    if (it == measures.end()) throw PreconditionError("vertex " + x.to_string() + " not in graph");
    return it->second;
  }
};

/// Wraps a model and inflates the weight of every edge reported from its
/// lexicographically smaller endpoint, breaking symmetry (fault injection).
class AsymmetricFaultModel final : public GraphModel {
 public:
  AsymmetricFaultModel(std::shared_ptr<const GraphModel> inner, double factor)
      : inner_(std::move(inner)), factor_(factor) {}
  void neighbors(const VertexId& x, std::vector<Neighbor>& out) const override {
    const auto start = out.size();
    inner_->neighbors(x, out);
    for (auto i = start; i < out.size(); ++i)
      if (x < out[i].vertex) out[i].weight *= factor_;
  }
  double measure(const VertexId& x) const override { return inner_->measure(x); }
  std::optional<VertexId> canonical_seed() const override { return inner_->canonical_seed(); }
  std::optional<std::int64_t> canonical_distance(const VertexId& x) const override {
    return inner_->canonical_distance(x);
  }

 private:
  std::shared_ptr<const GraphModel> inner_;
  double factor_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Families

/// Z^n with unit weights on axis edges and mu = 2n.
inline WeightedGraph make_lattice(int n) {
  if (n < 1) throw PreconditionError("lattice dimension must be >= 1, got " + std::to_string(n));
  if (n > static_cast<int>(VertexId::kMaxDim))
    throw PreconditionError("lattice dimension above " + std::to_string(VertexId::kMaxDim));
  FamilyTag tag;
  tag.kind = FamilyTag::Kind::lattice;
  tag.dimension = n;
  return WeightedGraph(std::make_shared<detail::LatticeModel>(n), tag);
}

/// Rooted tree with b(m) children per vertex of shell m; neighbors are served up to shell `depth`.
inline WeightedGraph make_tree(const IntRule& branching, std::int64_t depth) {
  if (depth < 1) throw PreconditionError("tree depth must be >= 1");
  FamilyTag tag;
  tag.kind = FamilyTag::Kind::tree;
  tag.rule = branching.descriptor();
  tag.depth = depth;
  return WeightedGraph(detail::TreeModel::create(branching, depth), tag);
}

inline WeightedGraph make_antitree(const IntRule& sphere, AntitreeConvention convention,
                                   std::int64_t depth) {
  if (depth < 1) throw PreconditionError("anti-tree depth must be >= 1");
  FamilyTag tag;
  tag.kind = FamilyTag::Kind::antitree;
  tag.rule = sphere.descriptor();
  tag.convention = convention;
  tag.depth = depth;
  return WeightedGraph(detail::AntitreeModel::create(sphere, convention, depth), tag);
}

/// Radial reduction of a profile as a weighted half-line (vertices radial(m, 0)).
inline WeightedGraph make_shell_chain(const RadialProfile& profile) {
  if (profile.size() < 2) throw PreconditionError("shell chain needs at least two shells");
  FamilyTag tag;
  tag.kind = FamilyTag::Kind::chain;
  tag.depth = static_cast<std::int64_t>(profile.max_shell()) - 1;
  return WeightedGraph(std::make_shared<detail::ShellChainModel>(profile), tag);
}

struct WeightedEdge {
  VertexId a;
  VertexId b;
  double weight;
};

/// Finite custom graph from an explicit edge list; symmetric by construction.
inline WeightedGraph make_custom(const std::vector<WeightedEdge>& edges,
                                 const std::unordered_map<VertexId, double, VertexHash>& measure) {
  auto model = std::make_shared<detail::CustomModel>();
  for (const auto& e : edges) {
    if (!(e.weight > 0.0)) throw DomainError("edge weights must be > 0");
    if (e.a == e.b) throw PreconditionError("loops are not allowed: " + e.a.to_string());
    model->adjacency[e.a].push_back({e.b, e.weight});
    model->adjacency[e.b].push_back({e.a, e.weight});
  }
  for (const auto& [v, m] : measure) {
    if (!(m > 0.0)) throw DomainError("vertex measure must be > 0 at " + v.to_string());
    model->adjacency.try_emplace(v);
    model->measures[v] = m;
  }
  for (const auto& [v, nbs] : model->adjacency)
    if (!model->measures.contains(v)) throw PreconditionError("no measure for " + v.to_string());
  return WeightedGraph(model, FamilyTag{});
}

/// Same graph whose oracle reports asymmetric weights (self-test fault injection).
inline WeightedGraph with_asymmetric_fault(const WeightedGraph& g, double factor = 1.5) {
  return WeightedGraph(std::make_shared<detail::AsymmetricFaultModel>(g.model_ptr(), factor), g.family());
}

struct EdgeAudit {
  std::size_t edges_checked = 0;
  double max_asymmetry = 0.0;  // max |w(x,y) - w(y,x)|, or w(x,y) when the reverse edge is missing
  std::optional<std::pair<VertexId, VertexId>> worst;
  std::size_t loops = 0;
  std::size_t nonpositive = 0;
  bool ok() const { return max_asymmetry == 0.0 && loops == 0 && nonpositive == 0; }
};

/// Round-trip audit of the oracle contract on all edges leaving `vertices`.
inline EdgeAudit audit_edges(const WeightedGraph& g, std::span<const VertexId> vertices) {
  EdgeAudit a;
  std::vector<Neighbor> fwd, back;
  for (const auto& x : vertices) {
    g.neighbors(x, fwd);
    for (const auto& nb : fwd) {
      ++a.edges_checked;
      if (nb.vertex == x) ++a.loops;
      if (!(nb.weight > 0.0)) ++a.nonpositive;
      g.neighbors(nb.vertex, back);
      double rev = -1.0;
      for (const auto& b : back)
        if (b.vertex == x) rev = b.weight;
      const double gap = rev < 0.0 ? std::abs(nb.weight) : std::abs(nb.weight - rev);
      if (gap > a.max_asymmetry) {
        a.max_asymmetry = gap;
        a.worst = std::pair{x, nb.vertex};
      }
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// Combinatorial geometry

/// Layer-by-layer breadth-first search from a seed set.
class LayeredBfs {
 public:
  LayeredBfs(const WeightedGraph& g, const std::vector<VertexId>& seed,
             std::size_t budget = default_vertex_budget())
      : g_(g), budget_(budget) {
    if (seed.empty()) throw PreconditionError("seed set is empty");
    for (const auto& s : seed)
      if (dist_.emplace(s, 0).second) frontier_.push_back(s);
    std::sort(frontier_.begin(), frontier_.end());
    layers_.push_back(frontier_);
  }

  /// Expands one more layer; false once the budget would be exceeded or nothing is left.
  bool advance() {
    if (frontier_.empty()) return false;
    std::vector<VertexId> next;
    std::vector<Neighbor> nbs;
    const auto d = static_cast<std::int64_t>(layers_.size());
    for (const auto& x : frontier_) {
      g_.neighbors(x, nbs);
      for (const auto& nb : nbs) {
        if (dist_.contains(nb.vertex)) continue;
        if (dist_.size() >= budget_) {
          exhausted_ = true;
          return false;
        }
        dist_.emplace(nb.vertex, d);
        next.push_back(nb.vertex);
      }
    }
    std::sort(next.begin(), next.end());
    frontier_ = next;
    layers_.push_back(std::move(next));
    return !frontier_.empty();
  }

  /// Runs until `depth` layers beyond the seed exist; throws when the budget is hit.
  void advance_to(std::int64_t depth) {
    while (static_cast<std::int64_t>(layers_.size()) <= depth) {
      if (!advance()) {
        if (exhausted_)
          throw BudgetExceededError("BFS exceeded the vertex budget of " + std::to_string(budget_));
        break;
      }
    }
  }

  std::optional<std::int64_t> distance(const VertexId& x) const {
    const auto it = dist_.find(x);
    if (it == dist_.end()) return std::nullopt;
    return it->second;
  }
  const std::vector<VertexId>& layer(std::size_t m) const { return layers_.at(m); }
  std::size_t layer_count() const { return layers_.size(); }
  bool budget_exhausted() const { return exhausted_; }

 private:
  const WeightedGraph& g_;
  std::size_t budget_;
  std::unordered_map<VertexId, std::int64_t, VertexHash> dist_;
  std::vector<VertexId> frontier_;
  std::vector<std::vector<VertexId>> layers_;
  bool exhausted_ = false;
};

/// r(x) = min over the seed of the edge-count distance; nullopt if not reached within budget.
inline std::optional<std::int64_t> combinatorial_distance(const WeightedGraph& g, const VertexId& x,
                                                          const std::vector<VertexId>& seed,
                                                          std::size_t budget = default_vertex_budget()) {
  LayeredBfs bfs(g, seed, budget);
  while (true) {
    if (auto d = bfs.distance(x)) return d;
    if (!bfs.advance()) return std::nullopt;
  }
}

/// (D+, D-) of x relative to the seed set.
inline std::pair<double, double> outer_inner_degree(const WeightedGraph& g,
                                                    const std::vector<VertexId>& seed,
                                                    const VertexId& x,
                                                    std::size_t budget = default_vertex_budget()) {
  LayeredBfs bfs(g, seed, budget);
  std::optional<std::int64_t> r;
  while (!(r = bfs.distance(x))) {
    if (!bfs.advance()) throw PreconditionError("vertex " + x.to_string() + " not reached from seed");
  }
  bfs.advance_to(*r + 1);
  double out = 0.0, in = 0.0;
  for (const auto& nb : g.neighbors(x)) {
    const auto d = bfs.distance(nb.vertex);
    if (!d) throw InvariantError("neighbor of " + x.to_string() + " missed by BFS");
    if (*d == *r + 1) out += nb.weight;
    if (*d == *r - 1) in += nb.weight;
  }
  const double mu = g.measure(x);
  return {out / mu, in / mu};
}

/// Raised when a graph is not weakly spherically symmetric; names the first offending shell.
class NotWeaklySymmetricError : public Error {
 public:
  NotWeaklySymmetricError(std::size_t shell, const std::string& what)
      : Error(what), shell_(shell) {}
  std::size_t shell() const { return shell_; }

 private:
  std::size_t shell_;
};

/// Per-shell outer/inner degrees measured on the materialized graph; fails if
/// some shell holds two vertices with different (D+, D-).
inline RadialProfile extract_radial_profile(const WeightedGraph& g, const std::vector<VertexId>& seed,
                                            std::int64_t max_shell,
                                            std::size_t budget = default_vertex_budget()) {
  if (max_shell < 0) throw PreconditionError("max shell must be >= 0");
  LayeredBfs bfs(g, seed, budget);
  bfs.advance_to(max_shell + 1);
  if (static_cast<std::int64_t>(bfs.layer_count()) <= max_shell)
    throw PreconditionError("graph has fewer than " + std::to_string(max_shell + 1) + " shells");
  RadialProfile p;
  constexpr double kTol = 1e-12;
  for (std::int64_t m = 0; m <= max_shell; ++m) {
    const auto& layer = bfs.layer(static_cast<std::size_t>(m));
    double dp0 = 0, dm0 = 0, total = 0;
    bool first = true;
    for (const auto& x : layer) {
      double out = 0, in = 0;
      for (const auto& nb : g.neighbors(x)) {
        const auto d = bfs.distance(nb.vertex);
        if (d && *d == m + 1) out += nb.weight;
        if (d && *d == m - 1) in += nb.weight;
      }
      const double mu = g.measure(x);
      out /= mu;
      in /= mu;
      total += mu;
      if (first) {
        dp0 = out;
        dm0 = in;
        first = false;
      } else if (std::abs(out - dp0) > kTol * std::max(1.0, std::abs(dp0)) ||
                 std::abs(in - dm0) > kTol * std::max(1.0, std::abs(dm0))) {
        std::ostringstream msg;
        msg << "not weakly spherically symmetric: shell " << m << " mixes (D+,D-)=(" << dp0 << ","
            << dm0 << ") and (" << out << "," << in << ") at " << x.to_string();
        throw NotWeaklySymmetricError(static_cast<std::size_t>(m), msg.str());
      }
    }
    p.d_plus.push_back(dp0);
    p.d_minus.push_back(dm0);
    p.shell_measure.push_back(total);
    p.shell_card.push_back(static_cast<double>(layer.size()));
  }
  return p;
}

/// Closed-form profile for built-in radial families (no materialization).
inline RadialProfile family_radial_profile(const WeightedGraph& g, std::int64_t max_shell) {
  auto p = g.model().closed_form_profile(max_shell);
  if (!p) throw PreconditionError(g.family().describe() + " has no closed-form radial profile");
  return *p;
}

/// Distance to the family's canonical seed (root / origin), BFS-free where possible.
inline std::int64_t canonical_radius(const WeightedGraph& g, const VertexId& x) {
  if (auto d = g.model().canonical_distance(x)) return *d;
  throw PreconditionError(g.family().describe() + " has no canonical radius");
}

inline double euclidean_norm(const VertexId& x) {
  if (x.kind() != VertexKind::lattice) throw PreconditionError("euclidean metric needs a lattice vertex");
  double s = 0;
  for (auto c : x.coords()) s += static_cast<double>(c) * static_cast<double>(c);
  return std::sqrt(s);
}

inline std::int64_t squared_norm(const VertexId& x) {
  std::int64_t s = 0;
  for (auto c : x.coords()) s += c * c;
  return s;
}

// ---------------------------------------------------------------------------
// Finite regions

struct RegionEdge {
  std::size_t target;  // closure index
  double weight;
};

/// A finite interior plus its one-edge boundary layer, with interior adjacency in CSR form.
///
/// Closure indices: [0, n) interior, [n, n + b) boundary, both sorted by VertexId.
class FiniteRegion {
 public:
  FiniteRegion(WeightedGraph g, std::vector<VertexId> interior) : g_(std::move(g)) {
    if (interior.empty()) throw PreconditionError("region interior is empty");
    std::sort(interior.begin(), interior.end());
    interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
    interior_ = std::move(interior);
    for (std::size_t i = 0; i < interior_.size(); ++i) index_.emplace(interior_[i], i);

    std::unordered_set<VertexId, VertexHash> outside;
    std::vector<std::vector<Neighbor>> nbs(interior_.size());
    for (std::size_t i = 0; i < interior_.size(); ++i) {
      g_.neighbors(interior_[i], nbs[i]);
      for (const auto& nb : nbs[i]) {
        if (nb.vertex == interior_[i]) throw InvariantError("loop at " + nb.vertex.to_string());
        if (!(nb.weight > 0.0)) throw InvariantError("non-positive weight at " + nb.vertex.to_string());
        if (!index_.contains(nb.vertex)) outside.insert(nb.vertex);
      }
    }
    boundary_.assign(outside.begin(), outside.end());
    std::sort(boundary_.begin(), boundary_.end());
    for (std::size_t k = 0; k < boundary_.size(); ++k) index_.emplace(boundary_[k], interior_.size() + k);

    offsets_.reserve(interior_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < interior_.size(); ++i) {
      double deg = 0;
      for (const auto& nb : nbs[i]) {
        edges_.push_back({index_.at(nb.vertex), nb.weight});
        deg += nb.weight;
      }
      degree_.push_back(deg);
      offsets_.push_back(edges_.size());
    }
    measure_.reserve(closure_size());
    for (std::size_t i = 0; i < closure_size(); ++i) {
      const double m = g_.measure(vertex(i));
      if (!(m > 0.0)) throw DomainError("vertex measure must be > 0 at " + vertex(i).to_string());
      measure_.push_back(m);
    }
  }

  const WeightedGraph& graph() const { return g_; }
  std::span<const VertexId> interior() const { return interior_; }
  std::span<const VertexId> boundary() const { return boundary_; }
  std::size_t interior_size() const { return interior_.size(); }
  std::size_t boundary_size() const { return boundary_.size(); }
  std::size_t closure_size() const { return interior_.size() + boundary_.size(); }

  const VertexId& vertex(std::size_t closure_index) const {
    return closure_index < interior_.size() ? interior_[closure_index]
                                            : boundary_[closure_index - interior_.size()];
  }
  std::optional<std::size_t> index_of(const VertexId& x) const {
    const auto it = index_.find(x);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool is_interior(std::size_t closure_index) const { return closure_index < interior_.size(); }

  /// Edges of interior vertex i (targets are closure indices).
  std::span<const RegionEdge> edges(std::size_t i) const {
    return {edges_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  double measure(std::size_t closure_index) const { return measure_[closure_index]; }
  double degree(std::size_t interior_index) const { return degree_[interior_index]; }
  /// Deg(x) = deg(x)/mu(x) for interior vertices.
  double normalized_degree(std::size_t interior_index) const {
    return degree_[interior_index] / measure_[interior_index];
  }

 private:
  WeightedGraph g_;
  std::vector<VertexId> interior_;
  std::vector<VertexId> boundary_;
  std::unordered_map<VertexId, std::size_t, VertexHash> index_;
  std::vector<std::size_t> offsets_;
  std::vector<RegionEdge> edges_;
  std::vector<double> degree_;
  std::vector<double> measure_;
};

/// B_R(seed) = {x : d(x, seed) < R} with its one-edge boundary layer.
inline FiniteRegion materialize_ball(const WeightedGraph& g, const std::vector<VertexId>& seed,
                                     double radius, Metric metric,
                                     std::size_t budget = default_vertex_budget()) {
  if (!(radius >= 1.0)) throw PreconditionError("ball radius must be >= 1");
  if (seed.empty()) throw PreconditionError("seed set is empty");
  std::vector<VertexId> interior;
  if (metric == Metric::combinatorial) {
    const auto max_d = static_cast<std::int64_t>(std::ceil(radius)) - 1;
    LayeredBfs bfs(g, seed, budget);
    bfs.advance_to(max_d);
    for (std::int64_t d = 0; d <= max_d && d < static_cast<std::int64_t>(bfs.layer_count()); ++d) {
      const auto& layer = bfs.layer(static_cast<std::size_t>(d));
      interior.insert(interior.end(), layer.begin(), layer.end());
    }
  } else {
    if (g.family().kind != FamilyTag::Kind::lattice)
      throw PreconditionError("euclidean balls are only defined on lattices, not on " +
                              g.family().describe());
    if (seed.size() != 1) throw PreconditionError("euclidean balls need a single center");
    const auto& c = seed.front();
    const auto n = c.dim();
    const auto span = static_cast<std::int64_t>(std::ceil(radius)) - 1;
    const double r2 = radius * radius;
    double box = 1;
    for (std::size_t k = 0; k < n; ++k) box *= static_cast<double>(2 * span + 1);
    if (box > 8.0 * static_cast<double>(budget))
      throw BudgetExceededError("euclidean ball of radius " + std::to_string(radius) +
                                " exceeds the vertex budget");
    std::vector<std::int64_t> off(n, -span), coords(n);
    while (true) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += static_cast<double>(off[k]) * static_cast<double>(off[k]);
      if (s < r2) {
        for (std::size_t k = 0; k < n; ++k) coords[k] = c.coord(k) + off[k];
        interior.push_back(VertexId::lattice(coords));
        if (interior.size() > budget)
          throw BudgetExceededError("ball exceeds the vertex budget of " + std::to_string(budget));
      }
      std::size_t k = 0;
      while (k < n && ++off[k] > span) off[k++] = -span;
      if (k == n) break;
    }
  }
  return FiniteRegion(g, std::move(interior));
}

}  // namespace graphheat
