#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probcer/event.hpp"

namespace probcer {

/// `var` took alternative `alt` (positive) or did not take it (negative).
struct Literal {
  int var = 0;
  int alt = 0;
  bool positive = true;

  friend auto operator<=>(const Literal&, const Literal&) = default;
};

using Conjunct = std::vector<Literal>;

/// Sorts, deduplicates and simplifies a conjunct; nullopt if it is
/// contradictory (two alternatives of one variable, or `v=a` with `v!=a`).
std::optional<Conjunct> normalize(Conjunct c);

/// Disjunction of conjunctions. An empty DNF is false; a DNF holding an
/// empty conjunct is true.
struct Lineage {
  std::vector<Conjunct> conjuncts;

  static Lineage truth() { return Lineage{{Conjunct{}}}; }
  static Lineage falsity() { return Lineage{}; }
  static Lineage of(Conjunct c);

  bool is_false() const { return conjuncts.empty(); }
  void add(Conjunct c);
  void add(const Lineage& other);

  friend bool operator==(const Lineage&, const Lineage&) = default;
};

Lineage conjoin(const Lineage& a, const Lineage& b);
std::set<int> variables(const Lineage& l);

/// A random variable: an input event (one value per alternative plus
/// non-occurrence) or a synthetic rule coin.
struct Variable {
  std::string label;
  std::string type;
  Timestamp ts = 0;
  std::uint64_t order = 0;   // position in the input stream; coins sort after events
  std::vector<double> probs;  // per alternative; 1 - sum is the remaining outcome
  int parent = -1;            // first-order Markov parent
  bool synthetic = false;

  double mass() const;
};

class VariableTable {
 public:
  int add(Variable v);
  const Variable& operator[](int id) const { return vars_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return vars_.size(); }

 private:
  std::vector<Variable> vars_;
};

/// Conditional table over event-type pairs: (predecessor, successor) -> P.
struct CPT {
  std::map<std::pair<std::string, std::string>, double> entries;

  std::optional<double> lookup(const std::string& prev, const std::string& next) const;
  bool empty() const { return entries.empty(); }
  /// Predecessor types declared for `next`.
  std::vector<std::string> predecessors(const std::string& next) const;
};

inline constexpr std::size_t kDefaultLineageCap = 25;

/// Probability of a single conjunct. Exact for any conjunct under
/// independence.
double conjunct_prob(const Conjunct& c, const VariableTable& vars);

/// Exact probability that the lineage holds. Independent variables use
/// Shannon expansion with memoization and component splitting; with `cpt`
/// set, event variables follow the Markov chain given by their parents.
/// Throws LINEAGE_TOO_LARGE when more than `cap` distinct event variables occur.
double ce_marginal(const Lineage& lineage, const VariableTable& vars, std::size_t cap = kDefaultLineageCap,
                   const CPT* cpt = nullptr);

std::string to_string(const Lineage& l, const VariableTable& vars);

}  // namespace probcer
